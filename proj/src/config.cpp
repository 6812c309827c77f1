#include "crsfl/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace crsfl {

namespace {

std::string trim(const std::string& s) {
  std::size_t lo = s.find_first_not_of(" \t\r");
  if (lo == std::string::npos) return "";
  std::size_t hi = s.find_last_not_of(" \t\r");
  return s.substr(lo, hi - lo + 1);
}

[[noreturn]] void fail(const std::string& key, int line,
                       const std::string& why) {
  std::ostringstream os;
  os << "config";
  if (line > 0) os << " line " << line;
  if (!key.empty()) os << ", key '" << key << "'";
  os << ": " << why;
  throw ConfigError(os.str());
}

std::int64_t parse_i64(const std::string& key, const std::string& raw,
                       int line) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc() || ptr != raw.data() + raw.size()) {
    fail(key, line, "expected an integer, got '" + raw + "'");
  }
  return v;
}

std::uint32_t parse_u32(const std::string& key, const std::string& raw,
                        int line) {
  std::int64_t v = parse_i64(key, raw, line);
  if (v < 0 || v > 0xffffffffll) {
    fail(key, line, "value out of range: '" + raw + "'");
  }
  return static_cast<std::uint32_t>(v);
}

double parse_double(const std::string& key, const std::string& raw,
                    int line) {
  try {
    std::size_t used = 0;
    double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    fail(key, line, "expected a real number, got '" + raw + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& raw, int line) {
  if (raw == "true" || raw == "1") return true;
  if (raw == "false" || raw == "0") return false;
  fail(key, line, "expected true/false, got '" + raw + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct KeySpec {
  std::string key;
  std::string type;
  bool required;
  std::string doc;
  std::function<void(ExperimentConfig&, const std::string&, int)> set;
  // Returns the line's value, or nullopt to omit the key from
  // format_config output.
  std::function<std::optional<std::string>(const ExperimentConfig&)> get;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = [] {
    std::vector<KeySpec> ks;
    auto add = [&](KeySpec s) { ks.push_back(std::move(s)); };

    add({"seed", "int", true, "experiment seed; the run is a pure function "
         "of the config including this value",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.seed = parse_i64("seed", v, l);
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return std::to_string(c.seed);
         }});
    add({"rounds", "int", true, "number of training rounds R",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.rounds = parse_u32("rounds", v, l);
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return std::to_string(c.rounds);
         }});
    add({"clients", "int", true, "number of device clients m",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.clients = parse_u32("clients", v, l);
           if (c.clients == 0) fail("clients", l, "must be positive");
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return std::to_string(c.clients);
         }});
    add({"dataset", "synth|idx", true, "data source",
         [](ExperimentConfig& c, const std::string& v, int l) {
           if (v == "synth") c.dataset = DatasetKind::kSynth;
           else if (v == "idx") c.dataset = DatasetKind::kIdx;
           else fail("dataset", l, "expected synth or idx, got '" + v + "'");
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return c.dataset == DatasetKind::kSynth ? "synth" : "idx";
         }});
    add({"synth_n", "int", false, "synthetic training samples (default 2000)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.synth_n = parse_u32("synth_n", v, l);
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return std::to_string(c.synth_n);
         }});
    add({"synth_features", "int", false, "synthetic feature count (default 16)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.synth_features = parse_u32("synth_features", v, l);
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return std::to_string(c.synth_features);
         }});
    add({"synth_classes", "int", false, "synthetic class count (default 4)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.synth_classes = parse_u32("synth_classes", v, l);
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return std::to_string(c.synth_classes);
         }});
    add({"synth_sep", "real", false,
         "synthetic class-mean separation scale (default 3.0)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.synth_sep = parse_double("synth_sep", v, l);
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return fmt_double(c.synth_sep);
         }});
    add({"synth_test_n", "int", false,
         "synthetic held-out samples (default 1000)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.synth_test_n = parse_u32("synth_test_n", v, l);
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return std::to_string(c.synth_test_n);
         }});
    auto add_path = [&](const char* key, std::string ExperimentConfig::*field,
                        const char* doc) {
      add({key, "path", false, doc,
           [field, key = std::string(key)](ExperimentConfig& c,
                                           const std::string& v, int) {
             c.*field = v;
           },
           [field](const ExperimentConfig& c) -> std::optional<std::string> {
             if ((c.*field).empty()) return std::nullopt;
             return c.*field;
           }});
    };
    add_path("idx_images", &ExperimentConfig::idx_images,
             "IDX image file for training data (required for dataset = idx)");
    add_path("idx_labels", &ExperimentConfig::idx_labels,
             "IDX label file for training data (required for dataset = idx)");
    add_path("idx_test_images", &ExperimentConfig::idx_test_images,
             "IDX image file for evaluation; when omitted the last 20% of "
             "training data is held out");
    add_path("idx_test_labels", &ExperimentConfig::idx_test_labels,
             "IDX label file for evaluation");
    add({"partition", "shards|dirichlet", false,
         "non-i.i.d. split scheme (default shards)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           if (v == "shards") c.partition = PartitionKind::kShards;
           else if (v == "dirichlet") c.partition = PartitionKind::kDirichlet;
           else fail("partition", l, "expected shards or dirichlet");
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return c.partition == PartitionKind::kShards ? "shards"
                                                        : "dirichlet";
         }});
    add({"shards_per_client", "int", false,
         "label-sorted shards dealt to each client (default 2)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.shards_per_client = parse_u32("shards_per_client", v, l);
           if (c.shards_per_client == 0) {
             fail("shards_per_client", l, "must be positive");
           }
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return std::to_string(c.shards_per_client);
         }});
    add({"dirichlet_beta", "real", false,
         "Dirichlet concentration for partition = dirichlet (default 0.5)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.dirichlet_beta = parse_double("dirichlet_beta", v, l);
           if (!(c.dirichlet_beta > 0)) {
             fail("dirichlet_beta", l, "must be positive");
           }
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return fmt_double(c.dirichlet_beta);
         }});
    add({"min_samples", "int", false,
         "minimum samples per client after partitioning (default 2)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.min_samples = parse_u32("min_samples", v, l);
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return std::to_string(c.min_samples);
         }});
    add({"model", "logreg|mlp1", true, "classifier",
         [](ExperimentConfig& c, const std::string& v, int l) {
           auto kind = model_kind_from_string(v);
           if (!kind) fail("model", l, "expected logreg or mlp1");
           c.model = *kind;
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return to_string(c.model);
         }});
    add({"hidden", "int", false, "MLP hidden width (default 32)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.hidden = parse_u32("hidden", v, l);
           if (c.hidden == 0) fail("hidden", l, "must be positive");
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return std::to_string(c.hidden);
         }});
    add({"sampler", "identity|crs|minmax|gspar|topk|poisson", true,
         "gradient compressor",
         [](ExperimentConfig& c, const std::string& v, int l) {
           auto kind = sampler_kind_from_string(v);
           if (!kind) fail("sampler", l, "unknown sampler '" + v + "'");
           c.sampler = *kind;
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return to_string(c.sampler);
         }});
    add({"k", "int", false, "absolute sampling size (exclusive with "
         "sampling_ratio)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.k = parse_u32("k", v, l);
           if (c.k == 0) fail("k", l, "must be positive");
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           if (c.k == 0) return std::nullopt;
           return std::to_string(c.k);
         }});
    add({"sampling_ratio", "real", false,
         "sampling size as a fraction of the model dimension; resolved to "
         "K = ceil(ratio * d) once the model fixes d",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.sampling_ratio = parse_double("sampling_ratio", v, l);
           if (!(c.sampling_ratio > 0 && c.sampling_ratio <= 1)) {
             fail("sampling_ratio", l, "must lie in (0, 1]");
           }
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           if (c.sampling_ratio == 0) return std::nullopt;
           return fmt_double(c.sampling_ratio);
         }});
    add({"p", "real", false, "coordinate sampling probability (poisson; "
         "for crs defaults to its admissible maximum 1 - e^{-epsilon})",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.p = parse_double("p", v, l);
           if (!(c.p > 0 && c.p <= 1)) fail("p", l, "must lie in (0, 1]");
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           if (c.p == 0) return std::nullopt;
           return fmt_double(c.p);
         }});
    add({"epsilon", "real", false, "privacy budget (required for crs)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           double e = parse_double("epsilon", v, l);
           if (!(e > 0)) fail("epsilon", l, "must be positive");
           c.epsilon = e;
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           if (!c.epsilon) return std::nullopt;
           return fmt_double(*c.epsilon);
         }});
    add({"feedback", "bool", false,
         "error accumulation for topk (default true)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.feedback = parse_bool("feedback", v, l);
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return c.feedback ? "true" : "false";
         }});
    add({"crs_fixed_p_scaling", "bool", false,
         "scale crs values by the fixed p instead of the conditional "
         "inclusion probability (default false; biased, for comparison)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.crs_fixed_p_scaling = parse_bool("crs_fixed_p_scaling", v, l);
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return c.crs_fixed_p_scaling ? "true" : "false";
         }});
    add({"laplace_scale", "real", false,
         "Laplace noise scale added to each transmitted update; 0 disables "
         "(default 0)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.laplace_scale = parse_double("laplace_scale", v, l);
           if (c.laplace_scale < 0) {
             fail("laplace_scale", l, "must be non-negative");
           }
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return fmt_double(c.laplace_scale);
         }});
    add({"lr", "real", false, "learning rate (default 0.01)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.lr = parse_double("lr", v, l);
           if (!(c.lr > 0)) fail("lr", l, "must be positive");
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return fmt_double(c.lr);
         }});
    add({"lr_decay", "real", false,
         "inverse-time decay: lr_r = lr / (1 + lr_decay * r) (default 1e-4)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.lr_decay = parse_double("lr_decay", v, l);
           if (c.lr_decay < 0) fail("lr_decay", l, "must be non-negative");
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return fmt_double(c.lr_decay);
         }});
    add({"local_batch", "int", false,
         "minibatch size for the local epoch (default 32)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.local_batch = parse_u32("local_batch", v, l);
           if (c.local_batch == 0) fail("local_batch", l, "must be positive");
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return std::to_string(c.local_batch);
         }});
    add({"eval_every", "int", false,
         "evaluation cadence in rounds; the final round always evaluates "
         "(default 10)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           c.eval_every = parse_u32("eval_every", v, l);
           if (c.eval_every == 0) fail("eval_every", l, "must be positive");
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return std::to_string(c.eval_every);
         }});
    add({"engine", "delta|plain", false,
         "update encoding: delta transmits sampled gradient deltas against "
         "the reconstructed aggregate; plain transmits sampled raw "
         "gradients (default delta)",
         [](ExperimentConfig& c, const std::string& v, int l) {
           if (v == "delta") c.engine = EngineMode::kDelta;
           else if (v == "plain") c.engine = EngineMode::kPlain;
           else fail("engine", l, "expected delta or plain");
         },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           return c.engine == EngineMode::kDelta ? "delta" : "plain";
         }});
    add({"output", "path", false, "metrics CSV path (the run CLI's --out "
         "overrides this)",
         [](ExperimentConfig& c, const std::string& v, int) { c.output = v; },
         [](const ExperimentConfig& c) -> std::optional<std::string> {
           if (c.output.empty()) return std::nullopt;
           return c.output;
         }});
    return ks;
  }();
  return specs;
}

void validate_semantics(const ExperimentConfig& c) {
  if (c.dataset == DatasetKind::kIdx &&
      (c.idx_images.empty() || c.idx_labels.empty())) {
    fail("idx_images", 0,
         "dataset = idx requires keys 'idx_images' and 'idx_labels'");
  }
  if (c.sampler == SamplerKind::kCrs && !c.epsilon) {
    fail("epsilon", 0, "sampler = crs requires key 'epsilon'");
  }
  bool needs_k = c.sampler == SamplerKind::kCrs ||
                 c.sampler == SamplerKind::kMinMax ||
                 c.sampler == SamplerKind::kGSpar ||
                 c.sampler == SamplerKind::kTopK;
  if (needs_k) {
    if (c.k == 0 && c.sampling_ratio == 0) {
      fail("k", 0, "sampler = " + to_string(c.sampler) +
                       " requires key 'k' or 'sampling_ratio'");
    }
    if (c.k != 0 && c.sampling_ratio != 0) {
      fail("k", 0, "keys 'k' and 'sampling_ratio' are exclusive");
    }
  }
  if (c.sampler == SamplerKind::kPoisson && c.p == 0) {
    fail("p", 0, "sampler = poisson requires key 'p'");
  }
}

}  // namespace

const std::vector<ConfigKeyDoc>& config_keys() {
  static const std::vector<ConfigKeyDoc> docs = [] {
    std::vector<ConfigKeyDoc> out;
    for (const KeySpec& s : key_specs()) {
      out.push_back({s.key, s.type, s.required, s.doc});
    }
    return out;
  }();
  return docs;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail("", lineno, "expected 'key = value', got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    const KeySpec* spec = nullptr;
    for (const KeySpec& s : key_specs()) {
      if (s.key == key) {
        spec = &s;
        break;
      }
    }
    if (!spec) fail(key, lineno, "unknown key");
    if (!seen.insert(key).second) fail(key, lineno, "duplicate key");
    spec->set(cfg, value, lineno);
  }
  for (const KeySpec& s : key_specs()) {
    if (s.required && !seen.count(s.key)) {
      fail(s.key, 0, "missing required key");
    }
  }
  validate_semantics(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string format_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const KeySpec& s : key_specs()) {
    if (auto value = s.get(cfg)) {
      out += s.key;
      out += " = ";
      out += *value;
      out += '\n';
    }
  }
  return out;
}

}  // namespace crsfl
