#include "fedem/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace fedem {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail_at(const std::string& origin, std::size_t line, const std::string& msg) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

// Drops a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == '"') in_str = false;
    } else if (c == '"') {
      in_str = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string parse_quoted(const std::string& tok, const std::string& origin, std::size_t line) {
  if (tok.size() < 2 || tok.back() != '"') fail_at(origin, line, "unterminated string");
  std::string out;
  for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
    char c = tok[i];
    if (c == '\\') {
      if (i + 2 >= tok.size()) fail_at(origin, line, "dangling escape in string");
      char n = tok[++i];
      if (n == '"' || n == '\\') out.push_back(n);
      else if (n == 'n') out.push_back('\n');
      else if (n == 't') out.push_back('\t');
      else fail_at(origin, line, std::string("unsupported escape '\\") + n + "'");
    } else if (c == '"') {
      fail_at(origin, line, "unexpected '\"' inside string");
    } else {
      out.push_back(c);
    }
  }
  return out;
}

bool parse_number(const std::string& tok, double* out) {
  if (tok.empty()) return false;
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

std::vector<std::string> split_array_items(const std::string& inner, const std::string& origin,
                                           std::size_t line) {
  std::vector<std::string> items;
  std::string cur;
  bool in_str = false;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    char c = inner[i];
    if (in_str) {
      cur.push_back(c);
      if (c == '\\' && i + 1 < inner.size()) cur.push_back(inner[++i]);
      else if (c == '"') in_str = false;
    } else if (c == '"') {
      in_str = true;
      cur.push_back(c);
    } else if (c == ',') {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (in_str) fail_at(origin, line, "unterminated string in array");
  std::string last = trim(cur);
  if (!last.empty()) items.push_back(last);
  for (const auto& it : items)
    if (it.empty()) fail_at(origin, line, "empty element in array");
  return items;
}

TomlValue parse_value(const std::string& tok, const std::string& origin, std::size_t line) {
  TomlValue v;
  if (tok.empty()) fail_at(origin, line, "missing value");
  if (tok.front() == '"') {
    v.kind = TomlValue::Kind::kString;
    v.str = parse_quoted(tok, origin, line);
    return v;
  }
  if (tok == "true" || tok == "false") {
    v.kind = TomlValue::Kind::kBool;
    v.boolean = (tok == "true");
    return v;
  }
  if (tok.front() == '[') {
    if (tok.back() != ']') fail_at(origin, line, "unterminated array");
    auto items = split_array_items(tok.substr(1, tok.size() - 2), origin, line);
    if (items.empty()) {
      v.kind = TomlValue::Kind::kNumberList;
      return v;
    }
    if (items.front().front() == '"') {
      v.kind = TomlValue::Kind::kStringList;
      for (const auto& it : items) {
        if (it.front() != '"') fail_at(origin, line, "mixed types in array");
        v.str_list.push_back(parse_quoted(it, origin, line));
      }
    } else {
      v.kind = TomlValue::Kind::kNumberList;
      for (const auto& it : items) {
        double d;
        if (!parse_number(it, &d)) fail_at(origin, line, "bad number '" + it + "' in array");
        v.num_list.push_back(d);
      }
    }
    return v;
  }
  double d;
  if (parse_number(tok, &d)) {
    v.kind = TomlValue::Kind::kNumber;
    v.num = d;
    return v;
  }
  fail_at(origin, line, "unrecognized value '" + tok + "'");
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  return true;
}

// Shortest of %.12g / %.17g that parses back to the same double, so the
// echoed manifest reproduces the configuration exactly.
std::string fmt_num(double v) {
  if (v == static_cast<double>(static_cast<long long>(v)) && std::fabs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    return buf;
  }
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

bool TomlDoc::has(const std::string& section, const std::string& key) const {
  auto s = sections.find(section);
  return s != sections.end() && s->second.count(key) > 0;
}

const TomlValue& TomlDoc::get(const std::string& section, const std::string& key) const {
  auto s = sections.find(section);
  if (s == sections.end()) throw ConfigError("missing section [" + section + "]");
  auto k = s->second.find(key);
  if (k == s->second.end())
    throw ConfigError("missing key '" + key + "' in [" + section + "]");
  return k->second;
}

TomlDoc parse_toml(const std::string& text, const std::string& origin) {
  TomlDoc doc;
  std::istringstream in(text);
  std::string raw, section;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail_at(origin, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) fail_at(origin, lineno, "bad section name '" + section + "'");
      doc.sections[section];  // an empty section is legal
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) fail_at(origin, lineno, "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!valid_key(key)) fail_at(origin, lineno, "bad key '" + key + "'");
    if (section.empty()) fail_at(origin, lineno, "key outside any [section]");
    if (doc.sections[section].count(key))
      fail_at(origin, lineno, "duplicate key '" + key + "' in [" + section + "]");
    doc.sections[section][key] = parse_value(val, origin, lineno);
  }
  return doc;
}

TomlDoc parse_toml_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open manifest: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_toml(buf.str(), path);
}

namespace {

const TomlValue* find(const TomlDoc& doc, const std::string& sec, const std::string& key) {
  auto s = doc.sections.find(sec);
  if (s == doc.sections.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

[[noreturn]] void type_fail(const std::string& sec, const std::string& key, const char* want) {
  throw ConfigError("[" + sec + "]." + key + ": expected " + want);
}

std::string get_str(const TomlDoc& d, const std::string& s, const std::string& k,
                    const std::string& def) {
  const TomlValue* v = find(d, s, k);
  if (!v) return def;
  if (v->kind != TomlValue::Kind::kString) type_fail(s, k, "a string");
  return v->str;
}

double get_num(const TomlDoc& d, const std::string& s, const std::string& k, double def) {
  const TomlValue* v = find(d, s, k);
  if (!v) return def;
  if (v->kind != TomlValue::Kind::kNumber) type_fail(s, k, "a number");
  return v->num;
}

long long get_int(const TomlDoc& d, const std::string& s, const std::string& k, long long def) {
  const TomlValue* v = find(d, s, k);
  if (!v) return def;
  if (v->kind != TomlValue::Kind::kNumber) type_fail(s, k, "an integer");
  double n = v->num;
  if (n != std::floor(n) || std::fabs(n) > 9e15) type_fail(s, k, "an integer");
  return static_cast<long long>(n);
}

bool get_bool(const TomlDoc& d, const std::string& s, const std::string& k, bool def) {
  const TomlValue* v = find(d, s, k);
  if (!v) return def;
  if (v->kind != TomlValue::Kind::kBool) type_fail(s, k, "a boolean");
  return v->boolean;
}

std::vector<double> get_num_list(const TomlDoc& d, const std::string& s, const std::string& k) {
  const TomlValue* v = find(d, s, k);
  if (!v) return {};
  if (v->kind != TomlValue::Kind::kNumberList) type_fail(s, k, "an array of numbers");
  return v->num_list;
}

void check_known_keys(const TomlDoc& doc) {
  static const std::map<std::string, std::set<std::string>> known = {
      {"run", {"name", "seed", "output_root", "attack_rounds"}},
      {"dataset",
       {"kind", "name", "dir", "normalize", "mean", "std", "classes", "per_class", "dims"}},
      {"model", {"kind", "hidden", "activation"}},
      {"federation",
       {"clients", "rounds", "clients_per_round", "lr", "patience", "batch", "defense"}},
      {"fedem", {"rho_max", "rho_min", "alpha", "iterations", "eta_u"}},
      {"ldp", {"sigma", "b", "clip"}},
      {"attack",
       {"enabled", "iterations", "lr", "restarts", "images_per_client", "label_mode", "init"}},
  };
  for (const auto& [sec, keys] : doc.sections) {
    auto it = known.find(sec);
    if (it == known.end()) throw ConfigError("unknown section [" + sec + "]");
    for (const auto& [key, _] : keys)
      if (!it->second.count(key))
        throw ConfigError("unknown key '" + key + "' in [" + sec + "]");
  }
}

}  // namespace

ExperimentManifest ExperimentManifest::from_doc(const TomlDoc& doc, const std::string& origin) {
  check_known_keys(doc);
  ExperimentManifest m;

  m.name = get_str(doc, "run", "name", m.name);
  if (m.name.empty()) throw ConfigError("[run].name must not be empty");
  for (char c : m.name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.')
      throw ConfigError("[run].name: only letters, digits, '-', '_', '.' allowed");
  long long seed = get_int(doc, "run", "seed", static_cast<long long>(m.seed));
  if (seed < 0) throw ConfigError("[run].seed must be non-negative");
  m.seed = static_cast<std::uint64_t>(seed);
  m.output_root = get_str(doc, "run", "output_root", m.output_root);
  for (double r : get_num_list(doc, "run", "attack_rounds")) {
    if (r != std::floor(r) || r < 1) throw ConfigError("[run].attack_rounds: rounds are integers >= 1");
    m.attack_rounds.push_back(static_cast<int>(r));
  }

  m.dataset_kind = get_str(doc, "dataset", "kind", m.dataset_kind);
  if (m.dataset_kind != "synth" && m.dataset_kind != "idx" && m.dataset_kind != "cifar10")
    throw ConfigError("[dataset].kind must be synth, idx, or cifar10");
  m.dataset_name = get_str(doc, "dataset", "name",
                           m.dataset_kind == "synth" ? "synth" : m.dataset_kind);
  m.dataset_dir = get_str(doc, "dataset", "dir", "");
  if (m.dataset_kind != "synth" && m.dataset_dir.empty())
    throw ConfigError("[dataset].dir is required for kind '" + m.dataset_kind + "'");
  m.normalize = get_bool(doc, "dataset", "normalize", m.normalize);
  m.mean_override = get_num_list(doc, "dataset", "mean");
  m.std_override = get_num_list(doc, "dataset", "std");
  if (m.mean_override.size() != m.std_override.size())
    throw ConfigError("[dataset].mean and [dataset].std must have the same length");
  for (double s : m.std_override)
    if (s <= 0) throw ConfigError("[dataset].std entries must be positive");
  m.synth_classes = static_cast<int>(get_int(doc, "dataset", "classes", m.synth_classes));
  m.synth_per_class = static_cast<int>(get_int(doc, "dataset", "per_class", m.synth_per_class));
  long long dims = get_int(doc, "dataset", "dims", static_cast<long long>(m.synth_dims));
  if (m.dataset_kind == "synth") {
    if (m.synth_classes < 2) throw ConfigError("[dataset].classes must be >= 2");
    if (m.synth_per_class < 1) throw ConfigError("[dataset].per_class must be >= 1");
    if (dims < 2) throw ConfigError("[dataset].dims must be >= 2");
  }
  m.synth_dims = static_cast<std::size_t>(dims);

  std::string mk = get_str(doc, "model", "kind", "mlp");
  if (mk == "mlp") m.model.kind = ModelSpec::Kind::kMlp;
  else if (mk == "cnn") m.model.kind = ModelSpec::Kind::kCnn;
  else throw ConfigError("[model].kind must be mlp or cnn");
  m.model.hidden.clear();
  for (double h : get_num_list(doc, "model", "hidden")) {
    if (h != std::floor(h) || h < 1) throw ConfigError("[model].hidden: sizes are integers >= 1");
    m.model.hidden.push_back(static_cast<std::size_t>(h));
  }
  std::string act = get_str(doc, "model", "activation", "sigmoid");
  if (act == "sigmoid") m.model.activation = Activation::kSigmoid;
  else if (act == "tanh") m.model.activation = Activation::kTanh;
  else throw ConfigError("[model].activation must be sigmoid or tanh");

  m.fed.clients = static_cast<int>(get_int(doc, "federation", "clients", m.fed.clients));
  m.fed.rounds = static_cast<int>(get_int(doc, "federation", "rounds", m.fed.rounds));
  m.fed.per_round =
      static_cast<int>(get_int(doc, "federation", "clients_per_round", m.fed.clients));
  m.fed.lr = get_num(doc, "federation", "lr", m.fed.lr);
  m.fed.patience = static_cast<int>(get_int(doc, "federation", "patience", m.fed.patience));
  m.fed.batch = static_cast<int>(get_int(doc, "federation", "batch", m.fed.batch));
  std::string def = get_str(doc, "federation", "defense", "none");
  try {
    m.fed.defense = defense_from(def);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[federation].defense: ") + e.what());
  }
  try {
    m.fed.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[federation]: ") + e.what());
  }

  m.perturb.rho_max = get_num(doc, "fedem", "rho_max", m.perturb.rho_max);
  m.perturb.rho_min = get_num(doc, "fedem", "rho_min", m.perturb.rho_min);
  m.perturb.alpha = get_num(doc, "fedem", "alpha", m.perturb.rho_max > 0 ? m.perturb.rho_max / 4.0 : 2.0);
  m.perturb.iterations = static_cast<int>(get_int(doc, "fedem", "iterations", m.perturb.iterations));
  m.perturb.eta_u = get_num(doc, "fedem", "eta_u", m.perturb.eta_u);
  if (m.fed.defense == Defense::kFedem) {
    try {
      m.perturb.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("[fedem]: ") + e.what());
    }
  }

  double sigma = get_num(doc, "ldp", "sigma", 0.0);
  double b = get_num(doc, "ldp", "b", 0.0);
  double clip = get_num(doc, "ldp", "clip", 0.0);
  switch (m.fed.defense) {
    case Defense::kLdpGaussian:
      m.noise = {NoiseSpec::Mechanism::kGaussian, sigma, 0.0};
      break;
    case Defense::kLdpLaplace:
      m.noise = {NoiseSpec::Mechanism::kLaplace, b, 0.0};
      break;
    case Defense::kDpClip:
      m.noise = {NoiseSpec::Mechanism::kGaussian, sigma, clip};
      if (clip <= 0) throw ConfigError("[ldp].clip must be positive for dp-clip");
      break;
    default:
      m.noise = {NoiseSpec::Mechanism::kNone, 0.0, 0.0};
      break;
  }
  try {
    m.noise.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[ldp]: ") + e.what());
  }

  m.attack.enabled = get_bool(doc, "attack", "enabled", m.attack.enabled);
  m.attack.iterations = static_cast<int>(get_int(doc, "attack", "iterations", m.attack.iterations));
  m.attack.lr = get_num(doc, "attack", "lr", m.attack.lr);
  m.attack.restarts = static_cast<int>(get_int(doc, "attack", "restarts", m.attack.restarts));
  m.attack.images_per_client =
      static_cast<int>(get_int(doc, "attack", "images_per_client", m.attack.images_per_client));
  std::string lm = get_str(doc, "attack", "label_mode", "optimize");
  if (lm == "optimize") m.attack.label_mode = AttackConfig::LabelMode::kOptimize;
  else if (lm == "known") m.attack.label_mode = AttackConfig::LabelMode::kKnown;
  else throw ConfigError("[attack].label_mode must be optimize or known");
  std::string init = get_str(doc, "attack", "init", "gaussian");
  if (init != "gaussian") throw ConfigError("[attack].init must be gaussian");
  m.attack.init = AttackConfig::Init::kGaussian;
  try {
    m.attack.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[attack]: ") + e.what());
  }

  for (int r : m.attack_rounds)
    if (r > m.fed.rounds)
      throw ConfigError("[run].attack_rounds: round " + std::to_string(r) + " exceeds [federation].rounds");

  // A relative dataset directory is anchored at the manifest's own
  // location, so runs work from any working directory.
  if (!m.dataset_dir.empty() && m.dataset_dir.front() != '/' && origin.find('/') != std::string::npos)
    m.dataset_dir = origin.substr(0, origin.find_last_of('/')) + "/" + m.dataset_dir;
  return m;
}

ExperimentManifest ExperimentManifest::load(const std::string& path) {
  return from_doc(parse_toml_file(path), path);
}

std::vector<int> ExperimentManifest::resolved_attack_rounds() const {
  if (!attack_rounds.empty()) {
    std::vector<int> out = attack_rounds;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  if (fed.rounds == 1) return {1};
  return {1, fed.rounds};
}

std::string ExperimentManifest::echo() const {
  std::ostringstream o;
  o << "[run]\n";
  o << "name = \"" << name << "\"\n";
  o << "seed = " << seed << "\n";
  o << "output_root = \"" << output_root << "\"\n";
  o << "attack_rounds = [";
  for (std::size_t i = 0; i < attack_rounds.size(); ++i)
    o << (i ? ", " : "") << attack_rounds[i];
  o << "]\n\n";

  o << "[dataset]\n";
  o << "kind = \"" << dataset_kind << "\"\n";
  o << "name = \"" << dataset_name << "\"\n";
  if (!dataset_dir.empty()) o << "dir = \"" << dataset_dir << "\"\n";
  o << "normalize = " << (normalize ? "true" : "false") << "\n";
  if (!mean_override.empty()) {
    o << "mean = [";
    for (std::size_t i = 0; i < mean_override.size(); ++i)
      o << (i ? ", " : "") << fmt_num(mean_override[i]);
    o << "]\n";
    o << "std = [";
    for (std::size_t i = 0; i < std_override.size(); ++i)
      o << (i ? ", " : "") << fmt_num(std_override[i]);
    o << "]\n";
  }
  if (dataset_kind == "synth") {
    o << "classes = " << synth_classes << "\n";
    o << "per_class = " << synth_per_class << "\n";
    o << "dims = " << synth_dims << "\n";
  }
  o << "\n[model]\n";
  o << "kind = \"" << (model.kind == ModelSpec::Kind::kCnn ? "cnn" : "mlp") << "\"\n";
  o << "hidden = [";
  for (std::size_t i = 0; i < model.hidden.size(); ++i) o << (i ? ", " : "") << model.hidden[i];
  o << "]\n";
  o << "activation = \"" << (model.activation == Activation::kTanh ? "tanh" : "sigmoid")
    << "\"\n";

  o << "\n[federation]\n";
  o << "clients = " << fed.clients << "\n";
  o << "rounds = " << fed.rounds << "\n";
  o << "clients_per_round = " << fed.per_round << "\n";
  o << "lr = " << fmt_num(fed.lr) << "\n";
  o << "patience = " << fed.patience << "\n";
  o << "batch = " << fed.batch << "\n";
  o << "defense = \"" << defense_name(fed.defense) << "\"\n";

  o << "\n[fedem]\n";
  o << "rho_max = " << fmt_num(perturb.rho_max) << "\n";
  o << "rho_min = " << fmt_num(perturb.rho_min) << "\n";
  o << "alpha = " << fmt_num(perturb.alpha) << "\n";
  o << "iterations = " << perturb.iterations << "\n";
  o << "eta_u = " << fmt_num(perturb.eta_u) << "\n";

  o << "\n[ldp]\n";
  double sigma = 0, b = 0, clip = 0;
  if (fed.defense == Defense::kLdpGaussian || fed.defense == Defense::kDpClip)
    sigma = noise.scale;
  if (fed.defense == Defense::kLdpLaplace) b = noise.scale;
  if (fed.defense == Defense::kDpClip) clip = noise.clip;
  o << "sigma = " << fmt_num(sigma) << "\n";
  o << "b = " << fmt_num(b) << "\n";
  o << "clip = " << fmt_num(clip) << "\n";

  o << "\n[attack]\n";
  o << "enabled = " << (attack.enabled ? "true" : "false") << "\n";
  o << "iterations = " << attack.iterations << "\n";
  o << "lr = " << fmt_num(attack.lr) << "\n";
  o << "restarts = " << attack.restarts << "\n";
  o << "images_per_client = " << attack.images_per_client << "\n";
  o << "label_mode = \""
    << (attack.label_mode == AttackConfig::LabelMode::kKnown ? "known" : "optimize") << "\"\n";
  o << "init = \"gaussian\"\n";
  return o.str();
}

const char* axis_name(SweepSpec::Axis a) {
  switch (a) {
    case SweepSpec::Axis::kIterations: return "perturb-iterations";
    case SweepSpec::Axis::kRhoMin: return "rho-min";
    case SweepSpec::Axis::kMethod: return "method";
  }
  return "?";
}

namespace {

std::string dirname_of(const std::string& path) {
  auto pos = path.find_last_of('/');
  if (pos == std::string::npos) return ".";
  if (pos == 0) return "/";
  return path.substr(0, pos);
}

std::string label_for_number(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%g", v);
  std::string s = buf;
  for (char& c : s)
    if (c == '.') c = 'p';
  return s;
}

}  // namespace

SweepSpec SweepSpec::load(const std::string& path) {
  TomlDoc doc = parse_toml_file(path);
  for (const auto& [sec, _] : doc.sections)
    if (sec != "sweep") throw ConfigError(path + ": unknown section [" + sec + "] in sweep spec");
  static const std::set<std::string> known = {"axis", "values", "base"};
  if (doc.sections.count("sweep"))
    for (const auto& [key, _] : doc.sections.at("sweep"))
      if (!known.count(key)) throw ConfigError(path + ": unknown key '" + key + "' in [sweep]");

  SweepSpec sw;
  std::string ax = get_str(doc, "sweep", "axis", "");
  if (ax == "perturb-iterations") sw.axis = Axis::kIterations;
  else if (ax == "rho-min") sw.axis = Axis::kRhoMin;
  else if (ax == "method") sw.axis = Axis::kMethod;
  else throw ConfigError("[sweep].axis must be perturb-iterations, rho-min, or method");

  const TomlValue& vals = doc.get("sweep", "values");
  if (sw.axis == Axis::kMethod) {
    if (vals.kind != TomlValue::Kind::kStringList)
      throw ConfigError("[sweep].values must be an array of method names");
    sw.str_values = vals.str_list;
    for (const auto& s : sw.str_values) {
      try {
        defense_from(s);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("[sweep].values: ") + e.what());
      }
    }
  } else {
    if (vals.kind != TomlValue::Kind::kNumberList)
      throw ConfigError("[sweep].values must be an array of numbers");
    sw.num_values = vals.num_list;
    for (double v : sw.num_values) {
      if (sw.axis == Axis::kIterations && (v != std::floor(v) || v < 1))
        throw ConfigError("[sweep].values: perturbation iteration counts are integers >= 1");
      if (sw.axis == Axis::kRhoMin && v < 0)
        throw ConfigError("[sweep].values: rho_min must be non-negative");
    }
  }
  if (sw.count() == 0) throw ConfigError("[sweep].values must not be empty");

  std::string base = get_str(doc, "sweep", "base", "");
  if (base.empty()) throw ConfigError("[sweep].base is required");
  sw.base_path = base.front() == '/' ? base : dirname_of(path) + "/" + base;

  TomlDoc base_doc = parse_toml_file(sw.base_path);
  // The swept key must be explicit in the base manifest, so the sweep
  // overrides a stated value rather than a silent default.
  const char *sec = nullptr, *key = nullptr;
  switch (sw.axis) {
    case Axis::kIterations: sec = "fedem"; key = "iterations"; break;
    case Axis::kRhoMin: sec = "fedem"; key = "rho_min"; break;
    case Axis::kMethod: sec = "federation"; key = "defense"; break;
  }
  if (!base_doc.has(sec, key))
    throw ConfigError(sw.base_path + ": base manifest must set [" + std::string(sec) + "]." + key +
                      " explicitly when sweeping it");
  sw.base = ExperimentManifest::from_doc(base_doc, sw.base_path);
  return sw;
}

std::size_t SweepSpec::count() const {
  return axis == Axis::kMethod ? str_values.size() : num_values.size();
}

std::string SweepSpec::value_label(std::size_t i) const {
  return axis == Axis::kMethod ? str_values[i] : label_for_number(num_values[i]);
}

ExperimentManifest SweepSpec::instantiate(std::size_t i) const {
  ExperimentManifest m = base;
  switch (axis) {
    case Axis::kIterations:
      m.perturb.iterations = static_cast<int>(num_values[i]);
      break;
    case Axis::kRhoMin:
      m.perturb.rho_min = num_values[i];
      try {
        m.perturb.validate();
      } catch (const std::exception& e) {
        throw ConfigError(std::string("[sweep].values: ") + e.what());
      }
      break;
    case Axis::kMethod: {
      m.fed.defense = defense_from(str_values[i]);
      // Re-derive the noise mapping for the new method from the base's
      // [ldp] parameters.
      TomlDoc base_doc = parse_toml_file(base_path);
      base_doc.sections["federation"]["defense"] = [&] {
        TomlValue v;
        v.kind = TomlValue::Kind::kString;
        v.str = str_values[i];
        return v;
      }();
      m = ExperimentManifest::from_doc(base_doc, base_path);
      break;
    }
  }
  m.name = base.name + "-" + std::string(axis_name(axis)) + "-" + value_label(i);
  return m;
}

}  // namespace fedem
