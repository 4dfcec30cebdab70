#include "gibbsmpo/constants.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gibbsmpo/types.hpp"

namespace gibbsmpo {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    fail(ErrorKind::Validation, "constants: cannot parse " + key + " = " + v);
  }
}

std::string fmt(double x) {
  std::ostringstream o;
  o << std::setprecision(17) << x;
  return o.str();
}

}  // namespace

Constants Constants::builtin() { return Constants{}; }

void Constants::apply_override(const std::string& key, const std::string& value) {
  if (key == "c0")
    c0 = to_double(key, value);
  else if (key == "c1")
    c1 = to_double(key, value);
  else if (key == "c_f")
    c_f = to_double(key, value);
  else if (key == "c_prime")
    c_prime = to_double(key, value);
  else if (key == "beta0_cap")
    beta0_cap = to_double(key, value);
  else if (key == "local_dim_cap")
    local_dim_cap = to_double(key, value);
  else
    fail(ErrorKind::Validation, "unknown constant '" + key + "'");
  if (!(c0 > 0 && c1 > 0 && c_f > 0 && c_prime > 0 && beta0_cap > 0 && local_dim_cap >= 4))
    fail(ErrorKind::Validation, "constant '" + key + "' out of range");
}

Constants Constants::from_text(const std::string& text, const std::string& src) {
  Constants c;
  c.calibrated = true;
  c.source = src;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Validation, "constants: expected key = value in '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.size() > 5 && key.substr(key.size() - 5) == ".grid") {
      if (val.size() >= 2 && val.front() == '"' && val.back() == '"') val = val.substr(1, val.size() - 2);
      c.grids[key.substr(0, key.size() - 5)] = val;
    } else if (key == "calibrated") {
      c.calibrated = (val == "true");
    } else {
      c.apply_override(key, val);
    }
  }
  return c;
}

Constants Constants::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot read constants file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str(), path);
}

Constants Constants::from_env() {
  const char* p = std::getenv("GIBBSMPO_CONSTANTS");
  if (p && *p) {
    std::ifstream f(p);
    if (f) return load(p);
  }
  return builtin();
}

std::string Constants::to_text() const {
  std::ostringstream o;
  o << "# gibbsmpo constants\n";
  o << "calibrated = " << (calibrated ? "true" : "false") << "\n";
  auto put = [&](const char* key, double v) {
    o << key << " = " << fmt(v) << "\n";
    auto it = grids.find(key);
    if (it != grids.end()) o << key << ".grid = \"" << it->second << "\"\n";
  };
  put("c0", c0);
  put("c1", c1);
  put("c_f", c_f);
  put("c_prime", c_prime);
  put("beta0_cap", beta0_cap);
  put("local_dim_cap", local_dim_cap);
  return o.str();
}

}  // namespace gibbsmpo
