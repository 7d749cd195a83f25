#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "gtvd/cli.hpp"
#include "gtvd/errors.hpp"

namespace gtvd::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw InvalidArgument("setting '" + key + "': cannot parse '" + value + "' as a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw InvalidArgument("setting '" + key + "': expected true or false, got '" + value + "'");
}

std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Field {
  const char* key;
  std::function<void(DenoiseParams&, const std::string&)> set;
  std::function<std::string(const DenoiseParams&)> get;
};

template <class M>
Field real(const char* key, M DenoiseParams::*member) {
  return {key, [=](DenoiseParams& p, const std::string& v) { p.*member = parse_number<double>(key, v); },
          [=](const DenoiseParams& p) { return shortest(p.*member); }};
}

template <class M>
Field count(const char* key, M DenoiseParams::*member) {
  return {key, [=](DenoiseParams& p, const std::string& v) { p.*member = parse_number<M>(key, v); },
          [=](const DenoiseParams& p) { return std::to_string(p.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      real("gamma", &DenoiseParams::gamma),
      real("rho", &DenoiseParams::rho),
      real("t", &DenoiseParams::t),
      real("sigma_p", &DenoiseParams::sigma_p),
      count("k", &DenoiseParams::k),
      real("delta", &DenoiseParams::delta),
      real("collinearity_tol", &DenoiseParams::collinearity_tol),
      real("cg_tol", &DenoiseParams::cg_tol),
      count("cg_max_iter", &DenoiseParams::cg_max_iter),
      real("prox_tol", &DenoiseParams::prox_tol),
      count("prox_max_iter", &DenoiseParams::prox_max_iter),
      real("admm_tol", &DenoiseParams::admm_tol),
      count("admm_max_iter", &DenoiseParams::admm_max_iter),
      real("outer_tol", &DenoiseParams::outer_tol),
      count("outer_max_iter", &DenoiseParams::outer_max_iter),
      count("start_node", &DenoiseParams::start_node),
      {"start_seed",
       [](DenoiseParams& p, const std::string& v) {
         if (v == "none") p.start_seed.reset();
         else p.start_seed = parse_number<std::uint64_t>("start_seed", v);
       },
       [](const DenoiseParams& p) { return p.start_seed ? std::to_string(*p.start_seed) : std::string("none"); }},
      count("kld_window_hops", &DenoiseParams::kld_window_hops),
      {"recompute_bipartition",
       [](DenoiseParams& p, const std::string& v) { p.recompute_bipartition = parse_bool("recompute_bipartition", v); },
       [](const DenoiseParams& p) { return std::string(p.recompute_bipartition ? "true" : "false"); }},
      count("node_budget", &DenoiseParams::node_budget),
  };
  return all;
}

}  // namespace

Settings parse_settings(std::string_view text) {
  Settings out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value', got '" + std::string(line) + "'", line_no);
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError("missing key before '='", line_no);
    if (value.empty()) throw ParseError("missing value for '" + key + "'", line_no);
    if (!out.emplace(key, value).second) throw ParseError("duplicate key '" + key + "'", line_no);
  }
  return out;
}

Settings load_settings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_settings(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

void apply_settings(RunConfig& config, const Settings& settings) {
  for (const auto& [key, value] : settings) {
    bool known = false;
    for (const auto& f : fields()) {
      if (key != f.key) continue;
      f.set(config.params, value);
      known = true;
      break;
    }
    if (!known) throw InvalidArgument("unknown setting '" + key + "'");
    if (key == "gamma") config.gamma_explicit = true;
  }
}

std::string format_settings(const DenoiseParams& params) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(params) + "\n";
  return out;
}

std::vector<std::string> setting_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

}  // namespace gtvd::cli
