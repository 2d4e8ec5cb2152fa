#include "semcom/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "semcom/crypto.hpp"
#include "semcom/errors.hpp"

namespace semcom::sim {

DeviceProfile ScenarioConfig::device_profile(uint32_t index) const {
  DeviceProfile p;
  p.id = "dev" + std::to_string(index);
  p.max_symbols = max_symbols.empty() ? (1 << 16) : max_symbols[index % max_symbols.size()];
  p.kb_use = kb_use.empty() ? kb_vectors : kb_use[index % kb_use.size()];
  p.semantic_transport =
      semantic_transport.empty() ? true : semantic_transport[index % semantic_transport.size()];
  return p;
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ParseError(where + ": " + what);
}

double parse_double(const std::string& where, const std::string& v) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) fail(where, "trailing characters in number '" + v + "'");
    return out;
  } catch (const std::exception&) {
    fail(where, "not a number: '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& where, const std::string& v) {
  uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    fail(where, "not an unsigned integer: '" + v + "'");
  return out;
}

bool parse_bool(const std::string& where, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(where, "expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

// Single point of truth for the schema: both the text and JSON readers and
// the serializer dispatch through this.
void set_value(ScenarioConfig& c, const std::string& section, const std::string& key,
               const std::string& value, const std::string& where) {
  auto list_d = [&](const std::string& v) {
    std::vector<double> out;
    for (const auto& tok : split_list(v)) out.push_back(parse_double(where, tok));
    return out;
  };
  auto list_u32 = [&](const std::string& v) {
    std::vector<uint32_t> out;
    for (const auto& tok : split_list(v))
      out.push_back(static_cast<uint32_t>(parse_u64(where, tok)));
    return out;
  };

  if (section == "run") {
    if (key == "seed") c.seed = parse_u64(where, value);
    else if (key == "out_csv") c.out_csv = value;
    else if (key == "out_json") c.out_json = value;
    else if (key == "ledger_file") c.ledger_file = value;
    else fail(where, "unknown key '" + key + "' in [run]");
  } else if (section == "codec") {
    if (key == "feature_dim") c.feature_dim = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "kb_vectors") c.kb_vectors = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "channel_dim") c.channel_dim = static_cast<uint32_t>(parse_u64(where, value));
    else fail(where, "unknown key '" + key + "' in [codec]");
  } else if (section == "training") {
    if (key == "semantic_steps") c.training.semantic_steps = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "channel_steps") c.training.channel_steps = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "kb_steps") c.training.kb_steps = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "whole_steps") c.training.whole_steps = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "learning_rate") c.training.learning_rate = parse_double(where, value);
    else if (key == "snr_db") c.training.snr_db = parse_double(where, value);
    else fail(where, "unknown key '" + key + "' in [training]");
  } else if (section == "channel") {
    if (key == "model") {
      if (value == "awgn") c.channel.kind = signal::FadingKind::Awgn;
      else if (value == "rayleigh") c.channel.kind = signal::FadingKind::Rayleigh;
      else if (value == "rician") c.channel.kind = signal::FadingKind::Rician;
      else fail(where, "unknown channel model '" + value + "'");
    } else if (key == "rician_factor") c.channel.rician_factor = parse_double(where, value);
    else if (key == "snr_grid") c.snr_grid_db = list_d(value);
    else fail(where, "unknown key '" + key + "' in [channel]");
  } else if (section == "federation") {
    if (key == "channel_id") c.channel_id = value;
    else if (key == "rounds") c.federation_rounds = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "kb_only") c.kb_only = parse_bool(where, value);
    else if (key == "update_snr_db") c.update_snr_db = parse_double(where, value);
    else fail(where, "unknown key '" + key + "' in [federation]");
  } else if (section == "devices") {
    if (key == "count") c.device_count = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "late_joiners") c.late_joiners = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "max_symbols") {
      c.max_symbols.clear();
      for (const auto& tok : split_list(value)) c.max_symbols.push_back(parse_u64(where, tok));
    } else if (key == "kb_use") c.kb_use = list_u32(value);
    else if (key == "transport") {
      c.semantic_transport.clear();
      for (const auto& tok : split_list(value)) {
        if (tok == "semantic") c.semantic_transport.push_back(true);
        else if (tok == "conventional") c.semantic_transport.push_back(false);
        else fail(where, "transport must be semantic or conventional");
      }
    } else fail(where, "unknown key '" + key + "' in [devices]");
  } else if (section == "verification") {
    if (key == "index_size") c.verification.index_size = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "calibration_trials") c.verification.calibration_trials = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "release") {
      if (value == "delayed") c.verification.release = auth::ReleaseMode::Delayed;
      else if (value == "encrypted") c.verification.release = auth::ReleaseMode::Encrypted;
      else fail(where, "release must be delayed or encrypted");
    } else if (key == "diff_mode") {
      if (value == "sum") c.verification.diff_mode = auth::DiffMode::SumL1;
      else if (value == "mean") c.verification.diff_mode = auth::DiffMode::MeanL1;
      else fail(where, "diff_mode must be sum or mean");
    } else fail(where, "unknown key '" + key + "' in [verification]");
  } else if (section == "adversary") {
    if (key == "enabled") c.adversary.enabled = parse_bool(where, value);
    else if (key == "tamper_count") c.adversary.tamper_count = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "magnitude") {
      if (value == "above") c.adversary.magnitude = auth::TamperMagnitude::AboveThreshold;
      else if (value == "below") c.adversary.magnitude = auth::TamperMagnitude::BelowThreshold;
      else fail(where, "magnitude must be above or below");
    } else if (key == "fraction") c.adversary.fraction = parse_double(where, value);
    else fail(where, "unknown key '" + key + "' in [adversary]");
  } else if (section == "dp") {
    if (key == "enabled") c.dp.enabled = parse_bool(where, value);
    else if (key == "epsilon") c.dp.epsilon = parse_double(where, value);
    else if (key == "delta") c.dp.delta = parse_double(where, value);
    else if (key == "sigma_model") c.dp.sigma_model = parse_double(where, value);
    else if (key == "accounting") {
      if (value == "composition") c.dp.composition_accounting = true;
      else if (value == "aggregate") c.dp.composition_accounting = false;
      else fail(where, "accounting must be composition or aggregate");
    } else if (key == "h_min") c.dp.h_min = parse_double(where, value);
    else fail(where, "unknown key '" + key + "' in [dp]");
  } else if (section == "evaluation") {
    if (key == "sentences") c.evaluation.sentences = static_cast<uint32_t>(parse_u64(where, value));
    else if (key == "kb_prefix_grid") c.evaluation.kb_prefix_grid = list_u32(value);
    else if (key == "feature_keep_grid") c.evaluation.feature_keep_grid = list_d(value);
    else fail(where, "unknown key '" + key + "' in [evaluation]");
  } else {
    fail(where, "unknown section [" + section + "]");
  }
}

void validate(const ScenarioConfig& c) {
  if (c.feature_dim == 0 || c.kb_vectors < 2) fail("config", "codec dims too small");
  if (c.channel_dim == 0 || c.channel_dim % 2 != 0)
    fail("config", "channel_dim must be even and positive");
  if (c.device_count == 0) fail("config", "need at least one device");
  if (c.snr_grid_db.empty()) fail("config", "snr_grid must be nonempty");
  if (c.verification.index_size == 0) fail("config", "index_size must be positive");
  if (c.adversary.fraction < 0.0 || c.adversary.fraction > 1.0)
    fail("config", "adversary fraction must be in [0,1]");
  if (c.dp.enabled && !(c.dp.epsilon > 0.0 && c.dp.delta > 0.0 && c.dp.delta < 1.0))
    fail("config", "dp target budget invalid");
  for (uint32_t p : c.kb_use)
    if (p < 2 || p > c.kb_vectors) fail("config", "kb_use entries must be in [2, P]");
  for (uint32_t p : c.evaluation.kb_prefix_grid)
    if (p < 2 || p > c.kb_vectors) fail("config", "kb_prefix_grid entries must be in [2, P]");
  for (double f : c.evaluation.feature_keep_grid)
    if (f < 0.0 || f > 1.0) fail("config", "feature_keep_grid entries must be in [0,1]");
}

ScenarioConfig parse_json_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail("json", e.what());
  }
  ScenarioConfig c;
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object()) fail("json", "section '" + section + "' must be an object");
    for (const auto& [key, val] : body.items()) {
      std::string sval;
      if (val.is_string()) {
        sval = val.get<std::string>();
      } else if (val.is_boolean()) {
        sval = val.get<bool>() ? "true" : "false";
      } else if (val.is_number()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", val.get<double>());
        sval = buf;
      } else if (val.is_array()) {
        std::string joined;
        for (const auto& item : val) {
          if (!joined.empty()) joined += ",";
          if (item.is_string()) {
            joined += item.get<std::string>();
          } else {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", item.get<double>());
            joined += buf;
          }
        }
        sval = joined;
      } else {
        fail("json", "unsupported value type for " + section + "." + key);
      }
      set_value(c, section, key, sval, section + "." + key);
    }
  }
  validate(c);
  return c;
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  // JSON alternative
  for (char ch : text) {
    if (ch == ' ' || ch == '\n' || ch == '\t' || ch == '\r') continue;
    if (ch == '{') return parse_json_config(text);
    break;
  }

  ScenarioConfig c;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail(where, "unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) fail(where, "empty section name");
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos) fail(where, "expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section.empty()) fail(where, "key outside any section");
    if (key.empty()) fail(where, "empty key");
    set_value(c, section, key, value, where);
  }
  validate(c);
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ScenarioConfig& c) {
  std::ostringstream out;
  out << "[run]\n";
  out << "seed = " << c.seed << "\n";
  out << "out_csv = " << c.out_csv << "\n";
  out << "out_json = " << c.out_json << "\n";
  if (!c.ledger_file.empty()) out << "ledger_file = " << c.ledger_file << "\n";
  out << "\n[codec]\n";
  out << "feature_dim = " << c.feature_dim << "\n";
  out << "kb_vectors = " << c.kb_vectors << "\n";
  out << "channel_dim = " << c.channel_dim << "\n";
  out << "\n[training]\n";
  out << "semantic_steps = " << c.training.semantic_steps << "\n";
  out << "channel_steps = " << c.training.channel_steps << "\n";
  out << "kb_steps = " << c.training.kb_steps << "\n";
  out << "whole_steps = " << c.training.whole_steps << "\n";
  out << "learning_rate = " << fmt_double(c.training.learning_rate) << "\n";
  out << "snr_db = " << fmt_double(c.training.snr_db) << "\n";
  out << "\n[channel]\n";
  out << "model = "
      << (c.channel.kind == signal::FadingKind::Awgn
              ? "awgn"
              : c.channel.kind == signal::FadingKind::Rayleigh ? "rayleigh" : "rician")
      << "\n";
  out << "rician_factor = " << fmt_double(c.channel.rician_factor) << "\n";
  out << "snr_grid =";
  for (double v : c.snr_grid_db) out << " " << fmt_double(v);
  out << "\n";
  out << "\n[federation]\n";
  out << "channel_id = " << c.channel_id << "\n";
  out << "rounds = " << c.federation_rounds << "\n";
  out << "kb_only = " << (c.kb_only ? "true" : "false") << "\n";
  out << "update_snr_db = " << fmt_double(c.update_snr_db) << "\n";
  out << "\n[devices]\n";
  out << "count = " << c.device_count << "\n";
  out << "late_joiners = " << c.late_joiners << "\n";
  out << "max_symbols =";
  for (uint64_t v : c.max_symbols) out << " " << v;
  out << "\n";
  if (!c.kb_use.empty()) {
    out << "kb_use =";
    for (uint32_t v : c.kb_use) out << " " << v;
    out << "\n";
  }
  out << "transport =";
  for (bool v : c.semantic_transport) out << " " << (v ? "semantic" : "conventional");
  out << "\n";
  out << "\n[verification]\n";
  out << "index_size = " << c.verification.index_size << "\n";
  out << "calibration_trials = " << c.verification.calibration_trials << "\n";
  out << "release = "
      << (c.verification.release == auth::ReleaseMode::Delayed ? "delayed" : "encrypted")
      << "\n";
  out << "diff_mode = "
      << (c.verification.diff_mode == auth::DiffMode::SumL1 ? "sum" : "mean") << "\n";
  out << "\n[adversary]\n";
  out << "enabled = " << (c.adversary.enabled ? "true" : "false") << "\n";
  out << "tamper_count = " << c.adversary.tamper_count << "\n";
  out << "magnitude = "
      << (c.adversary.magnitude == auth::TamperMagnitude::AboveThreshold ? "above" : "below")
      << "\n";
  out << "fraction = " << fmt_double(c.adversary.fraction) << "\n";
  out << "\n[dp]\n";
  out << "enabled = " << (c.dp.enabled ? "true" : "false") << "\n";
  out << "epsilon = " << fmt_double(c.dp.epsilon) << "\n";
  out << "delta = " << fmt_double(c.dp.delta) << "\n";
  out << "sigma_model = " << fmt_double(c.dp.sigma_model) << "\n";
  out << "accounting = " << (c.dp.composition_accounting ? "composition" : "aggregate")
      << "\n";
  out << "h_min = " << fmt_double(c.dp.h_min) << "\n";
  out << "\n[evaluation]\n";
  out << "sentences = " << c.evaluation.sentences << "\n";
  if (!c.evaluation.kb_prefix_grid.empty()) {
    out << "kb_prefix_grid =";
    for (uint32_t v : c.evaluation.kb_prefix_grid) out << " " << v;
    out << "\n";
  }
  if (!c.evaluation.feature_keep_grid.empty()) {
    out << "feature_keep_grid =";
    for (double v : c.evaluation.feature_keep_grid) out << " " << fmt_double(v);
    out << "\n";
  }
  return out.str();
}

std::string config_hash(const ScenarioConfig& cfg) {
  const std::string text = serialize_config(cfg);
  const auto digest = crypto::sha256(
      {reinterpret_cast<const uint8_t*>(text.data()), text.size()});
  return crypto::hex(digest).substr(0, 16);
}

}  // namespace semcom::sim
