#include "scagan/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "scagan/log.hpp"
#include "scagan/ops.hpp"

namespace scagan {
namespace {

std::uint64_t generator_fingerprint(Phase phase, const ModelConfig& m) {
  return phase == Phase::Pct ? m.pct.fingerprint() : m.is.fingerprint();
}

void write_models(Archive& ar, const GanState& s) {
  s.generator.write_to(ar, "generator");
  s.ds.write_to(ar, "ds");
  s.dc.write_to(ar, "dc");
  s.g_opt.write_to(ar, "g_opt");
  s.d_opt.write_to(ar, "d_opt");
}

void copy_values(ModelParams& dst, const ModelParams& src) {
  auto& a = dst.entries();
  const auto& b = src.entries();
  if (a.size() != b.size()) throw ParamError("checkpoint parameter count differs from the model");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].first != b[i].first || a[i].second.shape() != b[i].second.shape()) {
      throw ParamError("checkpoint parameter " + b[i].first + " does not match the model");
    }
    a[i].second.mutable_value() = b[i].second.value();
  }
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

const char* kCsvHeader = "step,epoch,lr,g_adv,g_l1,g_per,g_cx,g_total,d_adv,content_source";

std::string csv_row(std::uint64_t step, int epoch, double lr, const StepRecord& r) {
  std::ostringstream os;
  os << std::setprecision(17) << step << ',' << epoch << ',' << lr;
  for (const char* t : {"g_adv", "g_l1", "g_per", "g_cx"}) os << ',' << r.terms.at(t);
  os << ',' << r.g_total << ',' << r.terms.at("d_adv") << ',' << r.content_source;
  return os.str();
}

// Keeps the header and the rows with step <= last_step (used when resuming).
void truncate_metrics(const std::filesystem::path& csv, std::uint64_t last_step) {
  std::ifstream in(csv);
  if (!in) return;
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (keep.empty()) {
      keep.push_back(line);
      continue;
    }
    if (line.empty()) continue;
    if (std::stoull(line.substr(0, line.find(','))) <= last_step) keep.push_back(line);
  }
  in.close();
  std::ofstream out(csv, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

}  // namespace

std::string to_string(Phase p) { return p == Phase::Pct ? "pct" : "is"; }

Phase parse_phase(const std::string& s) {
  if (s == "pct") return Phase::Pct;
  if (s == "is") return Phase::Is;
  throw TrainError("unknown phase '" + s + "' (pct, is)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw TrainError("epochs must be >= 1");
  if (decay_start_epoch < 0 || decay_start_epoch >= epochs) throw TrainError("decay_start_epoch must lie in [0, epochs)");
  if (!(lr > 0.0)) throw TrainError("lr must be > 0");
  if (batch_size < 1) throw TrainError("batch_size must be >= 1");
  if (checkpoint_every < 1) throw TrainError("checkpoint_every must be >= 1");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1)) throw TrainError("Adam betas must lie in [0,1)");
  weights.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"phase", to_string(phase)},
          {"epochs", epochs},
          {"decay_start_epoch", decay_start_epoch},
          {"lr", lr},
          {"adam", {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}},
          {"batch_size", batch_size},
          {"shuffle", shuffle},
          {"seed", seed},
          {"checkpoint_every", checkpoint_every},
          {"weights", {{"adv", weights.adv}, {"l1", weights.l1}, {"per", weights.per}, {"cx", weights.cx}}}};
}

double lr_at_epoch(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch > config.epochs) {
    throw TrainError("lr_at_epoch: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(config.epochs) + "]");
  }
  if (epoch < config.decay_start_epoch) return config.lr;
  const double remaining = static_cast<double>(config.epochs - epoch) /
                           static_cast<double>(config.epochs - config.decay_start_epoch);
  return config.lr * remaining;
}

ModelConfig ModelConfig::paper() {
  ModelConfig m;
  m.pct = PctConfig::paper();
  m.is = IsConfig::paper();
  m.disc_base_channels = 64;
  return m;
}

nlohmann::json ModelConfig::to_json() const {
  return {{"pct", pct.describe()},
          {"is", is.describe()},
          {"disc_base_channels", disc_base_channels},
          {"ablation",
           {{"content_source", to_string(is.content)},
            {"encoder_norm", to_string(is.encoder_norm)},
            {"decoder", to_string(is.decoder)}}}};
}

GanState::GanState(ModelParams g, ModelParams s, ModelParams c, DiscConfig sc, DiscConfig cc, AdamConfig adam)
    : generator(std::move(g)),
      ds(std::move(s)),
      dc(std::move(c)),
      ds_config(sc),
      dc_config(cc),
      g_opt({&generator}, adam),
      d_opt({&ds, &dc}, adam) {}

std::unique_ptr<GanState> build_phase1(const ModelConfig& models, const AdamConfig& adam, std::uint64_t seed) {
  const DiscConfig sc = DiscConfig::style(1, models.disc_base_channels);
  const DiscConfig cc = DiscConfig::pose(1, models.disc_base_channels);
  return std::make_unique<GanState>(build_pct(models.pct, seed), build_discriminator(sc, seed + 1, "ds_edge"),
                                    build_discriminator(cc, seed + 2, "dc_edge"), sc, cc, adam);
}

std::unique_ptr<GanState> build_phase2(const ModelConfig& models, const AdamConfig& adam, std::uint64_t seed) {
  const DiscConfig sc = DiscConfig::style(models.is.image_channels, models.disc_base_channels);
  DiscConfig cc = DiscConfig::pose(models.is.image_channels, models.disc_base_channels);
  cc.condition_channels = models.is.pose_channels;
  return std::make_unique<GanState>(build_is(models.is, seed), build_discriminator(sc, seed + 1, "ds"),
                                    build_discriminator(cc, seed + 2, "dc"), sc, cc, adam);
}

double discriminator_update(GanState& s, const AdversarialInputs& in, double lr) {
  s.g_opt.zero_grad();
  s.d_opt.zero_grad();
  const Var fake = detach(in.fake);
  const Var loss = adv_loss_discriminator(
      disc_forward(in.cond_s, in.real, s.ds, s.ds_config), disc_forward(in.cond_s, fake, s.ds, s.ds_config),
      disc_forward(in.cond_c, in.real, s.dc, s.dc_config), disc_forward(in.cond_c, fake, s.dc, s.dc_config));
  const double value = loss.item();
  if (!std::isfinite(value)) throw LossError("full_loss: term 'd_adv' is non-finite");
  backward(loss);
  s.d_opt.step(lr);
  s.d_opt.zero_grad();
  return value;
}

WeightedLoss generator_update(GanState& s, const AdversarialInputs& in, const FeatureExtractor& extractor,
                              const LossWeights& weights, double lr) {
  s.g_opt.zero_grad();
  s.d_opt.zero_grad();
  LossTerms terms;
  terms.adv = adv_loss_generator(disc_forward(in.cond_s, in.fake, s.ds, s.ds_config),
                                 disc_forward(in.cond_c, in.fake, s.dc, s.dc_config));
  terms.l1 = l1_loss(in.fake, in.real);
  const Var fake_img = in.edge_domain ? edge_as_image(in.fake) : in.fake;
  const Var real_img = in.edge_domain ? edge_as_image(in.real) : in.real;
  terms.per = perceptual_loss(fake_img, real_img, extractor);
  terms.cx = contextual_loss(fake_img, real_img, extractor);
  WeightedLoss g = full_loss(terms, weights);
  backward(g.total);
  s.g_opt.step(lr);
  s.g_opt.zero_grad();
  s.d_opt.zero_grad();  // discard what the generator loss pushed into D
  return g;
}

namespace {

StepRecord adversarial_step(GanState& s, const AdversarialInputs& in, const FeatureExtractor& extractor,
                            const LossWeights& weights, double lr) {
  StepRecord rec;
  rec.terms["d_adv"] = discriminator_update(s, in, lr);
  const WeightedLoss g = generator_update(s, in, extractor, weights, lr);
  for (const auto& [name, v] : g.breakdown) rec.terms["g_" + name] = v;
  rec.g_total = g.total.item();
  return rec;
}

}  // namespace

const std::vector<std::string>& StepRecord::term_names() {
  static const std::vector<std::string> names = {"g_adv", "g_l1", "g_per", "g_cx", "d_adv"};
  return names;
}

StepRecord train_step_phase1(const Batch& batch, GanState& state, const PctConfig& pct,
                             const FeatureExtractor& extractor, const LossWeights& weights, double lr) {
  AdversarialInputs in;
  in.cond_s = batch.source_edge;
  in.cond_c = batch.target_pose;
  in.real = batch.target_edge;
  in.fake = pct_forward(batch.source_edge, batch.source_pose, batch.target_pose, state.generator, pct);
  in.edge_domain = true;
  StepRecord rec = adversarial_step(state, in, extractor, weights, lr);
  rec.content_source = "source-edge";
  return rec;
}

Var content_input(const Batch& batch, const ModelParams* frozen_pct, const ModelConfig& models) {
  switch (models.is.content) {
    case ContentSource::PriorEdge: {
      if (!frozen_pct) throw TrainError("content source prior-edge needs a trained PCT-Net checkpoint");
      NoGradGuard guard;
      return pct_forward(batch.source_edge, batch.source_pose, batch.target_pose, *frozen_pct, models.pct);
    }
    case ContentSource::SourceEdge:
      return batch.source_edge;
    case ContentSource::None:
      return Var();
    case ContentSource::Semantic:
      if (!batch.target_labels.defined()) throw TrainError("content source semantic needs target label maps (labels_dir)");
      if (batch.target_labels.dim(1) != models.is.semantic_channels) {
        throw TrainError("label maps have " + std::to_string(batch.target_labels.dim(1)) + " classes, config expects " +
                         std::to_string(models.is.semantic_channels));
      }
      return batch.target_labels;
  }
  return Var();
}

StepRecord train_step_phase2(const Batch& batch, const ModelParams& frozen_pct, GanState& state,
                             const ModelConfig& models, const FeatureExtractor& extractor,
                             const LossWeights& weights, double lr, std::uint64_t z0_seed) {
  const bool needs_pct = models.is.content == ContentSource::PriorEdge;
  const Var content = content_input(batch, needs_pct ? &frozen_pct : nullptr, models);
  AdversarialInputs in;
  in.cond_s = batch.source_image;
  in.cond_c = batch.target_pose;
  in.real = batch.target_image;
  in.fake = is_forward(batch.source_image, content, batch.target_pose, z0_seed, state.generator, models.is);
  in.edge_domain = false;
  StepRecord rec = adversarial_step(state, in, extractor, weights, lr);
  rec.content_source = to_string(models.is.content);
  return rec;
}

std::string checkpoint_name(Phase phase, int epoch) {
  std::ostringstream os;
  os << to_string(phase) << "_epoch" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
  return os.str();
}

ModelParams load_generator(const std::filesystem::path& checkpoint, Phase phase, const ModelConfig& models) {
  if (!std::filesystem::exists(checkpoint)) {
    throw TrainError("missing " + to_string(phase) + " checkpoint: " + checkpoint.string());
  }
  const Archive ar = Archive::load(checkpoint);
  const std::string stored = ar.meta.value("phase", "");
  if (stored != to_string(phase)) {
    throw TrainError(checkpoint.string() + " holds a '" + stored + "' model, expected '" + to_string(phase) + "'");
  }
  return ModelParams::read_from(ar, "generator", generator_fingerprint(phase, models));
}

RunSummary run_training(const TrainConfig& config, const ModelConfig& models, const Dataset& dataset,
                        const FeatureExtractor& extractor, const RunOptions& options) {
  config.validate();
  if (dataset.size() == 0) throw TrainError("run_training: empty dataset");
  namespace fs = std::filesystem;
  fs::create_directories(options.out_dir / "checkpoints");

  std::unique_ptr<GanState> state = config.phase == Phase::Pct ? build_phase1(models, config.adam, config.seed)
                                                               : build_phase2(models, config.adam, config.seed);
  std::optional<ModelParams> frozen;
  if (config.phase == Phase::Is && models.is.content == ContentSource::PriorEdge) {
    if (!options.pct_checkpoint) throw TrainError("missing pct checkpoint: phase is with prior edges needs a trained edge generator");
    frozen = load_generator(*options.pct_checkpoint, Phase::Pct, models);
  }

  std::mt19937_64 rng(config.seed);
  RunSummary summary;
  summary.metrics_csv = options.out_dir / ("metrics_" + to_string(config.phase) + ".csv");
  std::uint64_t step = 0;
  int epoch = 0;
  if (options.resume) {
    const Archive ar = Archive::load(*options.resume);
    if (ar.meta.value("phase", "") != to_string(config.phase)) {
      throw TrainError("resume: " + options.resume->string() + " is not a '" + to_string(config.phase) + "' checkpoint");
    }
    copy_values(state->generator, ModelParams::read_from(ar, "generator", generator_fingerprint(config.phase, models)));
    copy_values(state->ds, ModelParams::read_from(ar, "ds", state->ds_config.fingerprint()));
    copy_values(state->dc, ModelParams::read_from(ar, "dc", state->dc_config.fingerprint()));
    state->g_opt.read_from(ar, "g_opt");
    state->d_opt.read_from(ar, "d_opt");
    std::istringstream(ar.meta.at("rng_state").get<std::string>()) >> rng;
    epoch = ar.meta.at("epoch").get<int>();
    step = ar.meta.at("step").get<std::uint64_t>();
    truncate_metrics(summary.metrics_csv, step);
  } else {
    std::ofstream(summary.metrics_csv, std::ios::trunc) << kCsvHeader << '\n';
  }
  summary.start_epoch = epoch;
  std::ofstream csv(summary.metrics_csv, std::ios::app);
  const ModelParams no_pct;
  const ModelParams& pct = frozen ? *frozen : no_pct;
  const int end = options.stop_after_epochs >= 0 ? std::min(config.epochs, epoch + options.stop_after_epochs)
                                                 : config.epochs;
  for (; epoch < end; ++epoch) {
    const double lr = lr_at_epoch(epoch, config);
    for (const auto& idx : epoch_batches(dataset.size(), static_cast<std::size_t>(config.batch_size), config.shuffle, rng)) {
      std::vector<TrainingPair> pairs;
      for (std::size_t i : idx) pairs.push_back(dataset.get(i));
      const Batch batch = collate(pairs);
      StepRecord rec;
      try {
        rec = config.phase == Phase::Pct
                  ? train_step_phase1(batch, *state, models.pct, extractor, config.weights, lr)
                  : train_step_phase2(batch, pct, *state, models, extractor, config.weights, lr, rng());
      } catch (const LossError& e) {
        std::string ids;
        for (const auto& id : batch.ids) ids += (ids.empty() ? "" : " ") + id;
        throw TrainError("step " + std::to_string(step + 1) + " (epoch " + std::to_string(epoch) + ", lr " +
                         std::to_string(lr) + ", pairs " + ids + "): " + e.what());
      }
      ++step;
      csv << csv_row(step, epoch, lr, rec) << '\n';
    }
    csv.flush();
    if ((epoch + 1) % config.checkpoint_every == 0 || epoch + 1 == config.epochs) {
      Archive ar;
      ar.meta["phase"] = to_string(config.phase);
      ar.meta["epoch"] = epoch + 1;  // epochs completed
      ar.meta["step"] = step;
      ar.meta["seed"] = config.seed;
      ar.meta["rng_state"] = rng_state(rng);
      ar.meta["train_config"] = config.to_json();
      ar.meta["model_config"] = models.to_json();
      ar.meta["extractor"] = extractor.provenance();
      write_models(ar, *state);
      const fs::path path = options.out_dir / "checkpoints" / checkpoint_name(config.phase, epoch + 1);
      ar.save(path);
      summary.checkpoints.push_back(path);
      log_info("saved " + path.string());
    }
  }
  summary.end_epoch = epoch;
  summary.steps = step;
  return summary;
}

}  // namespace scagan
