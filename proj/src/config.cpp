#include "scagan/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace scagan {
namespace {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"data",
       {"pairs", "images", "keypoints", "cache", "labels", "height", "width", "heatmap_sigma", "strict",
        "xdog_sigma", "xdog_k", "xdog_p", "xdog_epsilon", "xdog_phi", "semantic_channels"}},
      {"model",
       {"preset", "pct_base", "pct_max", "pct_downsamples", "pct_res", "is_levels", "is_base", "is_max",
        "is_modulation", "disc_base"}},
      {"train",
       {"phase", "epochs", "decay_start", "lr", "batch_size", "shuffle", "seed", "checkpoint_every", "beta1",
        "beta2", "eps"}},
      {"loss", {"adv", "l1", "per", "cx"}},
      {"ablation", {"name"}},
      {"features", {"extractor", "weights", "seed", "base"}},
  };
  return keys;
}

fs::path resolve(const fs::path& base, const std::string& value) {
  if (value.empty()) return {};
  const fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

template <typename T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
  const auto child = tree.get_child_optional(key);
  if (!child) return fallback;
  const auto value = child->get_value_optional<T>();
  if (!value) throw ConfigError("config: bad value for " + key + ": '" + child->data() + "'");
  return *value;
}

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names = {"none",
                                                 "w/o-prior-transfer",
                                                 "w/o-content-branch",
                                                 "spade-resblk",
                                                 "encoder-batch-norm",
                                                 "encoder-instance-norm",
                                                 "semantic-content"};
  return names;
}

void apply_ablation(const std::string& name, ModelConfig& models) {
  IsConfig& is = models.is;
  is.content = ContentSource::PriorEdge;
  is.decoder = DecoderKind::CsSpadeDeblk;
  is.encoder_norm = EncoderNorm::None;
  if (name == "none") return;
  if (name == "w/o-prior-transfer") {
    is.content = ContentSource::SourceEdge;
  } else if (name == "w/o-content-branch") {
    is.content = ContentSource::None;
  } else if (name == "spade-resblk") {
    is.decoder = DecoderKind::SpadeResblk;
  } else if (name == "encoder-batch-norm") {
    is.encoder_norm = EncoderNorm::Batch;
  } else if (name == "encoder-instance-norm") {
    is.encoder_norm = EncoderNorm::Instance;
  } else if (name == "semantic-content") {
    is.content = ContentSource::Semantic;
  } else {
    std::string list;
    for (const auto& n : ablation_names()) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown ablation '" + name + "' (" + list + ")");
  }
}

RunConfig parse_config(const std::string& text, const fs::path& base) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) {
      if (body.empty()) throw ConfigError("config: key '" + section + "' outside any section");
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
  }

  RunConfig c;
  const pt::ptree empty;
  const pt::ptree& d = tree.get_child("data", empty);
  c.paths.pairs = resolve(base, get<std::string>(d, "pairs", ""));
  c.paths.images = resolve(base, get<std::string>(d, "images", ""));
  c.paths.keypoints = resolve(base, get<std::string>(d, "keypoints", ""));
  c.data.cache_dir = resolve(base, get<std::string>(d, "cache", ""));
  c.data.labels_dir = resolve(base, get<std::string>(d, "labels", ""));
  c.data.height = get(d, "height", c.data.height);
  c.data.width = get(d, "width", c.data.width);
  c.data.heatmap_sigma = get(d, "heatmap_sigma", c.data.heatmap_sigma);
  c.data.strict = get(d, "strict", c.data.strict);
  c.data.semantic_channels = get(d, "semantic_channels", c.data.semantic_channels);
  c.data.xdog.sigma = get(d, "xdog_sigma", c.data.xdog.sigma);
  c.data.xdog.k = get(d, "xdog_k", c.data.xdog.k);
  c.data.xdog.p = get(d, "xdog_p", c.data.xdog.p);
  c.data.xdog.epsilon = get(d, "xdog_epsilon", c.data.xdog.epsilon);
  c.data.xdog.phi = get(d, "xdog_phi", c.data.xdog.phi);
  if (c.data.height <= 0 || c.data.width <= 0) throw ConfigError("config: [data] height and width must be positive");
  try {
    c.data.xdog.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  const pt::ptree& m = tree.get_child("model", empty);
  const std::string preset = get<std::string>(m, "preset", "desk");
  if (preset == "paper") {
    c.models = ModelConfig::paper();
  } else if (preset != "desk") {
    throw ConfigError("config: [model] preset must be desk or paper, got '" + preset + "'");
  }
  c.models.pct.base_channels = get(m, "pct_base", c.models.pct.base_channels);
  c.models.pct.max_channels = get(m, "pct_max", c.models.pct.max_channels);
  c.models.pct.num_downsamples = get(m, "pct_downsamples", c.models.pct.num_downsamples);
  c.models.pct.num_residual_blocks = get(m, "pct_res", c.models.pct.num_residual_blocks);
  c.models.is.levels = get(m, "is_levels", c.models.is.levels);
  c.models.is.base_channels = get(m, "is_base", c.models.is.base_channels);
  c.models.is.max_channels = get(m, "is_max", c.models.is.max_channels);
  c.models.is.modulation_channels = get(m, "is_modulation", c.models.is.modulation_channels);
  c.models.is.semantic_channels = c.data.semantic_channels;
  c.models.disc_base_channels = get(m, "disc_base", c.models.disc_base_channels);

  const pt::ptree& t = tree.get_child("train", empty);
  try {
    c.train.phase = parse_phase(get<std::string>(t, "phase", "pct"));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.train.epochs = get(t, "epochs", c.train.epochs);
  c.train.decay_start_epoch = get(t, "decay_start", c.train.decay_start_epoch);
  c.train.lr = get(t, "lr", c.train.lr);
  c.train.batch_size = get(t, "batch_size", c.train.batch_size);
  c.train.shuffle = get(t, "shuffle", c.train.shuffle);
  c.train.seed = get<std::uint64_t>(t, "seed", c.train.seed);
  c.train.checkpoint_every = get(t, "checkpoint_every", c.train.checkpoint_every);
  c.train.adam.beta1 = get(t, "beta1", c.train.adam.beta1);
  c.train.adam.beta2 = get(t, "beta2", c.train.adam.beta2);
  c.train.adam.eps = get(t, "eps", c.train.adam.eps);

  const pt::ptree& l = tree.get_child("loss", empty);
  c.train.weights.adv = get(l, "adv", c.train.weights.adv);
  c.train.weights.l1 = get(l, "l1", c.train.weights.l1);
  c.train.weights.per = get(l, "per", c.train.weights.per);
  c.train.weights.cx = get(l, "cx", c.train.weights.cx);

  c.ablation = get<std::string>(tree.get_child("ablation", empty), "name", "none");
  apply_ablation(c.ablation, c.models);

  const pt::ptree& f = tree.get_child("features", empty);
  c.features.extractor = get<std::string>(f, "extractor", c.features.extractor);
  c.features.weights = resolve(base, get<std::string>(f, "weights", ""));
  c.features.seed = get<std::uint64_t>(f, "seed", c.features.seed);
  c.features.base_channels = get(f, "base", c.features.base_channels);
  if (c.features.extractor != "random" && c.features.extractor != "vgg19") {
    throw ConfigError("config: [features] extractor must be random or vgg19, got '" + c.features.extractor + "'");
  }

  try {
    c.train.validate();
    c.models.pct.validate();
    c.models.is.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  RunConfig c = parse_config(text.str(), fs::absolute(path).parent_path());
  c.source = path;
  return c;
}

std::string format_config(const RunConfig& c) {
  std::ostringstream os;
  os << "[data]\n"
     << "pairs = " << c.paths.pairs.string() << "\n"
     << "images = " << c.paths.images.string() << "\n"
     << "keypoints = " << c.paths.keypoints.string() << "\n"
     << "cache = " << c.data.cache_dir.string() << "\n"
     << "labels = " << c.data.labels_dir.string() << "\n"
     << "height = " << c.data.height << "\nwidth = " << c.data.width << "\n"
     << "heatmap_sigma = " << num(c.data.heatmap_sigma) << "\n"
     << "strict = " << (c.data.strict ? "true" : "false") << "\n"
     << "semantic_channels = " << c.data.semantic_channels << "\n"
     << "xdog_sigma = " << num(c.data.xdog.sigma) << "\nxdog_k = " << num(c.data.xdog.k) << "\nxdog_p = " << num(c.data.xdog.p)
     << "\nxdog_epsilon = " << num(c.data.xdog.epsilon) << "\nxdog_phi = " << num(c.data.xdog.phi) << "\n\n"
     << "[model]\n"
     << "pct_base = " << c.models.pct.base_channels << "\npct_max = " << c.models.pct.max_channels
     << "\npct_downsamples = " << c.models.pct.num_downsamples << "\npct_res = " << c.models.pct.num_residual_blocks
     << "\nis_levels = " << c.models.is.levels << "\nis_base = " << c.models.is.base_channels
     << "\nis_max = " << c.models.is.max_channels << "\nis_modulation = " << c.models.is.modulation_channels
     << "\ndisc_base = " << c.models.disc_base_channels << "\n\n"
     << "[train]\n"
     << "phase = " << to_string(c.train.phase) << "\nepochs = " << c.train.epochs
     << "\ndecay_start = " << c.train.decay_start_epoch << "\nlr = " << num(c.train.lr)
     << "\nbatch_size = " << c.train.batch_size << "\nshuffle = " << (c.train.shuffle ? "true" : "false")
     << "\nseed = " << c.train.seed << "\ncheckpoint_every = " << c.train.checkpoint_every
     << "\nbeta1 = " << num(c.train.adam.beta1) << "\nbeta2 = " << num(c.train.adam.beta2) << "\neps = " << num(c.train.adam.eps)
     << "\n\n"
     << "[loss]\n"
     << "adv = " << num(c.train.weights.adv) << "\nl1 = " << num(c.train.weights.l1) << "\nper = " << num(c.train.weights.per)
     << "\ncx = " << num(c.train.weights.cx) << "\n\n"
     << "[ablation]\nname = " << c.ablation << "\n\n"
     << "[features]\nextractor = " << c.features.extractor << "\nweights = " << c.features.weights.string()
     << "\nseed = " << c.features.seed << "\nbase = " << c.features.base_channels << "\n";
  return os.str();
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["data"] = {{"pairs", paths.pairs.string()},
               {"images", paths.images.string()},
               {"keypoints", paths.keypoints.string()},
               {"cache", data.cache_dir.string()},
               {"labels", data.labels_dir.string()},
               {"height", data.height},
               {"width", data.width},
               {"heatmap_sigma", data.resolved_sigma()},
               {"strict", data.strict},
               {"xdog",
                {{"sigma", data.xdog.sigma},
                 {"k", data.xdog.k},
                 {"p", data.xdog.p},
                 {"epsilon", data.xdog.epsilon},
                 {"phi", data.xdog.phi}}}};
  j["model"] = models.to_json();
  j["train"] = train.to_json();
  j["ablation"] = ablation;
  j["features"] = {{"extractor", features.extractor},
                   {"weights", features.weights.string()},
                   {"seed", features.seed},
                   {"base", features.base_channels}};
  return j;
}

std::unique_ptr<FeatureExtractor> make_extractor(const FeaturesConfig& f) {
  if (f.extractor == "vgg19") {
    if (f.weights.empty()) throw ConfigError("[features] extractor = vgg19 needs a weights path");
    return std::make_unique<ConvPyramidExtractor>(ConvPyramidExtractor::vgg19(f.weights));
  }
  if (f.extractor == "random") {
    return std::make_unique<ConvPyramidExtractor>(ConvPyramidExtractor::random(f.seed, f.base_channels));
  }
  throw ConfigError("unknown feature extractor '" + f.extractor + "'");
}

}  // namespace scagan
