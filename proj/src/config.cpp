#include "specsense/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "specsense/error.hpp"

namespace specsense {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(value);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  require(res.ec == std::errc{} && res.ptr == end, ErrorKind::InvalidConfig,
          "'" + key + "' expects a number, got '" + text + "'");
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  require(res.ec == std::errc{} && res.ptr == end, ErrorKind::InvalidConfig,
          "'" + key + "' expects an integer, got '" + text + "'");
  return v;
}

int to_int(const std::string& key, const std::string& text) {
  const long long v = to_integer(key, text);
  require(v >= -2147483647LL && v <= 2147483647LL, ErrorKind::InvalidConfig, "'" + key + "' out of range");
  return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  require(res.ec == std::errc{} && res.ptr == end, ErrorKind::InvalidConfig,
          "'" + key + "' expects an unsigned integer, got '" + text + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail(ErrorKind::InvalidConfig, "'" + key + "' expects true or false, got '" + text + "'");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

struct Entry {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define NUM_ENTRY(name, field)                                                          \
  Entry {                                                                               \
    name, [](const ExperimentConfig& c) { return format_number(c.field); },             \
        [](ExperimentConfig& c, const std::string& v) { c.field = to_double(name, v); } \
  }
#define INT_ENTRY(name, field)                                                       \
  Entry {                                                                            \
    name, [](const ExperimentConfig& c) { return std::to_string(c.field); },         \
        [](ExperimentConfig& c, const std::string& v) { c.field = to_int(name, v); } \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      INT_ENTRY("n", scenario.n),
      INT_ENTRY("m", scenario.m),
      {"s_list",
       [](const ExperimentConfig& c) {
         std::vector<std::string> v;
         for (int s : c.s_list) v.push_back(std::to_string(s));
         return join(v);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.s_list.clear();
         for (const auto& item : split_list(v)) c.s_list.push_back(to_int("s_list", item));
       }},
      {"fading", [](const ExperimentConfig& c) { return std::string(to_string(c.scenario.fading)); },
       [](ExperimentConfig& c, const std::string& v) { c.scenario.fading = parse_fading(v); }},
      NUM_ENTRY("shadow_sigma_db", scenario.shadow_sigma_db),
      NUM_ENTRY("alpha", scenario.alpha),
      NUM_ENTRY("tx_power", scenario.tx_power),
      NUM_ENTRY("cr_area", scenario.cr_area),
      NUM_ENTRY("pr_area", scenario.pr_area),
      {"decoder", [](const ExperimentConfig& c) { return std::string(to_string(c.decoder)); },
       [](ExperimentConfig& c, const std::string& v) { c.decoder = parse_decoder(v); }},
      {"rate_list",
       [](const ExperimentConfig& c) {
         std::vector<std::string> v;
         for (double r : c.rate_list) v.push_back(format_number(r));
         return join(v);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.rate_list.clear();
         for (const auto& item : split_list(v)) c.rate_list.push_back(to_double("rate_list", item));
       }},
      {"snr_list",
       [](const ExperimentConfig& c) {
         std::vector<std::string> v;
         for (const auto& snr : c.snr_list) v.push_back(snr ? format_number(*snr) : "noiseless");
         return join(v);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.snr_list.clear();
         for (const auto& item : split_list(v)) {
           if (item == "noiseless")
             c.snr_list.emplace_back(std::nullopt);
           else
             c.snr_list.emplace_back(to_double("snr_list", item));
         }
       }},
      INT_ENTRY("trials", trials),
      {"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
       [](ExperimentConfig& c, const std::string& v) { c.seed = to_u64("seed", v); }},
      {"filter_law", [](const ExperimentConfig& c) { return std::string(to_string(c.filter_law)); },
       [](ExperimentConfig& c, const std::string& v) { c.filter_law = parse_filter_law(v); }},
      {"shared_filters", [](const ExperimentConfig& c) { return std::string(c.shared_filters ? "true" : "false"); },
       [](ExperimentConfig& c, const std::string& v) { c.shared_filters = to_bool("shared_filters", v); }},
      {"loss_mode", [](const ExperimentConfig& c) { return std::string(to_string(c.loss_mode)); },
       [](ExperimentConfig& c, const std::string& v) { c.loss_mode = parse_loss_mode(v); }},
      NUM_ENTRY("q_nominal", q_nominal),
      INT_ENTRY("p", fixed_p),
      NUM_ENTRY("mtol", fpca.mtol),
      NUM_ENTRY("delta", fpca.delta),
      NUM_ENTRY("tau_initial", fpca.tau_initial),
      NUM_ENTRY("tau_final", fpca.tau_final),
      NUM_ENTRY("eta", fpca.eta),
      {"tau_schedule",
       [](const ExperimentConfig& c) {
         std::vector<std::string> v;
         for (double t : c.fpca.tau_schedule) v.push_back(format_number(t));
         return join(v);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.fpca.tau_schedule.clear();
         for (const auto& item : split_list(v)) c.fpca.tau_schedule.push_back(to_double("tau_schedule", item));
       }},
      INT_ENTRY("fpca_max_iters", fpca.max_iters),
      INT_ENTRY("rank_budget", fpca.rank_budget),
      INT_ENTRY("decode_max_iters", decode.max_iters),
      {"trust_eps", [](const ExperimentConfig& c) { return format_number(c.joint.trust_eps); },
       [](ExperimentConfig& c, const std::string& v) {
         c.joint.trust_eps = c.decode.trust_eps = to_double("trust_eps", v);
       }},
      {"peak_frac", [](const ExperimentConfig& c) { return format_number(c.joint.peak_frac); },
       [](ExperimentConfig& c, const std::string& v) {
         c.joint.peak_frac = c.decode.peak_frac = to_double("peak_frac", v);
       }},
      {"vote_threshold", [](const ExperimentConfig& c) { return format_number(c.joint.vote_threshold); },
       [](ExperimentConfig& c, const std::string& v) {
         c.joint.vote_threshold = c.decode.vote_threshold = to_double("vote_threshold", v);
       }},
      {"tail_tol", [](const ExperimentConfig& c) { return format_number(c.joint.tail_tol); },
       [](ExperimentConfig& c, const std::string& v) {
         c.joint.tail_tol = c.decode.tail_tol = to_double("tail_tol", v);
       }},
      {"qualify_factor", [](const ExperimentConfig& c) { return format_number(c.joint.qualify_factor); },
       [](ExperimentConfig& c, const std::string& v) {
         c.joint.qualify_factor = c.decode.qualify_factor = to_double("qualify_factor", v);
       }},
      INT_ENTRY("max_outer_iters", joint.max_outer_iters),
      {"forced_cap_divisor", [](const ExperimentConfig& c) { return std::to_string(c.joint.forced_cap_divisor); },
       [](ExperimentConfig& c, const std::string& v) {
         c.joint.forced_cap_divisor = c.decode.forced_cap_divisor = to_int("forced_cap_divisor", v);
       }},
  };
  return table;
}

#undef NUM_ENTRY
#undef INT_ENTRY

const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> table = {
      {"s", "s_list"}, {"rate", "rate_list"}, {"rates", "rate_list"}, {"snr", "snr_list"}};
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void apply_setting(ExperimentConfig& config, const std::string& raw_key, const std::string& value) {
  std::string key = trim(raw_key);
  if (auto a = aliases().find(key); a != aliases().end()) key = a->second;
  for (const auto& e : entries()) {
    if (e.key == key) {
      e.set(config, trim(value));
      return;
    }
  }
  fail(ErrorKind::InvalidConfig, "unknown key '" + raw_key + "'");
}

ExperimentConfig parse_config(const std::string& text, const ExperimentConfig& base) {
  ExperimentConfig config = base;
  std::istringstream is(text);
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    try {
      require(eq != std::string::npos, ErrorKind::InvalidConfig, "expected 'key = value'");
      apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      fail(e.kind(), "line " + std::to_string(number) + ": " + e.what());
    }
  }
  return config;
}

std::string dump_config(const ExperimentConfig& config) {
  std::ostringstream os;
  for (const auto& e : entries()) os << e.key << " = " << e.get(config) << "\n";
  return os.str();
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return dump_config(a) == dump_config(b);
}

}  // namespace specsense
