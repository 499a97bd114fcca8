#include "svc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "svc/extract.hpp"
#include "svc/rng.hpp"

namespace svc {
namespace {

constexpr uint64_t kBatchTag = 0xba7c4;
constexpr uint64_t kNegativeTag = 0xc9c;
constexpr uint64_t kCodebookTag = 0xc0de;

F0Config f0_config(const FeatureConfig& f) {
  F0Config c;
  c.voicing_threshold = f.voicing_threshold;
  c.rms_gate = f.rms_gate;
  return c;
}

int64_t singer_position(const std::vector<std::string>& singers, const std::string& s) {
  auto it = std::find(singers.begin(), singers.end(), s);
  if (it == singers.end()) throw ValidationError("singer '" + s + "' is not in the singer list");
  return it - singers.begin();
}

Example make_example(const std::string& id, int64_t singer, const AudioClip& clip,
                     const PitchTrack& pitch, const ContentFeature& content,
                     const ContentFeature& reference) {
  const int64_t T = content.num_frames();
  if (reference.num_frames() != T || static_cast<int64_t>(pitch.size()) != T) {
    throw ValidationError(id + ": feature lengths disagree (content " + std::to_string(T) +
                          ", reference " + std::to_string(reference.num_frames()) +
                          ", pitch " + std::to_string(pitch.size()) + ")");
  }
  Example e;
  e.id = id;
  e.singer = singer;
  e.wave = torch::from_blob(const_cast<float*>(clip.samples.data()),
                            {static_cast<int64_t>(clip.samples.size())}, torch::kFloat32)
               .clone();
  e.content = content.frames.to(torch::kFloat32).contiguous();
  e.reference = reference.frames.to(torch::kFloat32).contiguous();
  const auto p = pitch_to_tensor(pitch);
  e.f0 = p.select(1, 0).contiguous();
  e.voiced = p.select(1, 1).contiguous();
  return e;
}

Dataset finish(std::vector<Example> examples, std::vector<std::string> singers,
               Codebook codebook, FeatureKind reference_kind) {
  if (examples.empty()) throw ValidationError("dataset is empty");
  Dataset d;
  d.examples = std::move(examples);
  d.singers = std::move(singers);
  d.codebook = std::move(codebook);
  d.pitch_stats = compute_pitch_stats(d.examples);
  d.reference_kind = reference_kind;
  return d;
}

// Re-indexes singers against the full manifest's list so that a split
// without some singer keeps the same embedding rows.
void use_singer_list(Dataset& data, const std::vector<std::string>& singers) {
  for (auto& e : data.examples) e.singer = singer_position(singers, data.singers.at(e.singer));
  data.singers = singers;
}

}  // namespace

ContentFeature reference_feature(const std::string& reference, const MelSpectrogram& mel,
                                 const ContentFeature& content,
                                 const std::filesystem::path& audio_path) {
  if (reference == "mel") return {mel.frames, FeatureKind::kMel};
  if (reference == "pseudo_ppg") return content;
  const auto kind = feature_kind_from_string(reference);
  if (kind == FeatureKind::kMel || kind == FeatureKind::kPitch) {
    throw ValidationError("features.reference cannot be '" + reference + "'");
  }
  auto path = audio_path;
  path.replace_extension(to_string(kind) + ".svcf");
  return load_external_feature(path, kind, mel.num_frames());
}

PitchStats compute_pitch_stats(const std::vector<Example>& examples) {
  double sum = 0, sq = 0;
  int64_t n = 0;
  for (const auto& e : examples) {
    const auto f = e.f0.to(torch::kFloat64);
    const auto v = e.voiced.to(torch::kFloat64);
    const auto* fp = f.data_ptr<double>();
    const auto* vp = v.data_ptr<double>();
    for (int64_t t = 0; t < f.numel(); ++t) {
      if (vp[t] < 0.5 || fp[t] <= 0) continue;
      const double l = std::log(fp[t]);
      sum += l;
      sq += l * l;
      ++n;
    }
  }
  PitchStats s;
  if (n == 0) return s;
  s.mean = sum / n;
  const double var = sq / n - s.mean * s.mean;
  s.stddev = var > 1e-12 ? std::sqrt(var) : 1.0;
  return s;
}

Dataset build_dataset(const std::vector<LabeledClip>& clips, const RunConfig& config,
                      const std::optional<Codebook>& codebook,
                      const std::vector<std::string>& singers) {
  if (clips.empty()) throw ValidationError("dataset is empty");
  std::vector<MelSpectrogram> mels;
  std::vector<PitchTrack> pitches;
  for (const auto& c : clips) {
    validate_clip(c.clip);
    mels.push_back(extract_mel(c.clip));
    pitches.push_back(extract_f0(c.clip, f0_config(config.features)));
  }
  Codebook cb = codebook ? *codebook
                         : fit_codebook(mels, config.features.codebook_size,
                                        derive_seed({config.seed, kCodebookTag}),
                                        config.features.codebook_temperature);
  auto names = singers;
  if (names.empty()) {
    std::set<std::string> s;
    for (const auto& c : clips) s.insert(c.singer);
    names.assign(s.begin(), s.end());
  }
  std::vector<Example> examples;
  FeatureKind ref_kind = FeatureKind::kMel;
  for (size_t i = 0; i < clips.size(); ++i) {
    const auto content = pseudo_content(mels[i], cb);
    const auto ref = reference_feature(config.features.reference, mels[i], content, clips[i].id);
    ref_kind = ref.kind;
    examples.push_back(make_example(clips[i].id, singer_position(names, clips[i].singer),
                                    clips[i].clip, pitches[i], content, ref));
  }
  return finish(std::move(examples), std::move(names), std::move(cb), ref_kind);
}

Dataset load_dataset(const DatasetManifest& manifest, const RunConfig& config,
                     const std::optional<std::filesystem::path>& features_dir,
                     const std::optional<Codebook>& codebook) {
  if (manifest.entries.empty()) throw ValidationError("manifest is empty");
  if (!features_dir) {
    std::vector<LabeledClip> clips;
    for (const auto& e : manifest.entries) {
      clips.push_back({manifest.resolve(e).string(), e.singer, read_wav(manifest.resolve(e))});
    }
    return build_dataset(clips, config, codebook, manifest.singers());
  }

  const auto names = manifest.singers();
  Codebook cb = codebook ? *codebook : load_extracted_codebook(*features_dir);
  std::vector<Example> examples;
  FeatureKind ref_kind = FeatureKind::kMel;
  for (const auto& e : manifest.entries) {
    const auto audio = manifest.resolve(e);
    const auto files = find_extracted(*features_dir, audio.string());
    const auto clip = read_wav(audio);
    validate_clip(clip);
    const MelSpectrogram mel{read_feature_file(files.mel).frames};
    const auto pitch = pitch_from_tensor(read_feature_file(files.f0).frames);
    const auto stored = read_feature_file(files.content);
    const ContentFeature content{stored.frames, stored.kind};
    if (content.dim() != cb.size()) {
      throw ValidationError(files.content.string() + " does not match the codebook size; rerun "
                            "`svc extract-features`");
    }
    const auto ref = reference_feature(config.features.reference, mel, content, audio);
    ref_kind = ref.kind;
    examples.push_back(
        make_example(audio.string(), singer_position(names, e.singer), clip, pitch, content, ref));
  }
  return finish(std::move(examples), names, std::move(cb), ref_kind);
}

Batch make_batch(const Dataset& data, const RunConfig& config, int64_t step) {
  if (data.examples.empty()) throw ValidationError("dataset is empty");
  Rng rng(derive_seed({config.seed, static_cast<uint64_t>(step), kBatchTag}));
  const int64_t B = config.train.batch_size;
  std::vector<const Example*> picks;
  int64_t F = config.train.segment_frames;
  for (int64_t b = 0; b < B; ++b) {
    picks.push_back(&data.examples[rng.below(data.examples.size())]);
    F = std::min(F, picks.back()->num_frames());
  }
  const int64_t hop = kHopSize;
  std::vector<torch::Tensor> content, reference, f0, voiced, singer, wave;
  for (const auto* e : picks) {
    const int64_t s = static_cast<int64_t>(rng.below(e->num_frames() - F + 1));
    content.push_back(e->content.narrow(0, s, F));
    reference.push_back(e->reference.narrow(0, s, F));
    f0.push_back(e->f0.narrow(0, s, F));
    voiced.push_back(e->voiced.narrow(0, s, F));
    singer.push_back(torch::tensor(e->singer, torch::kInt64));
    auto w = torch::zeros({F * hop}, torch::kFloat32);
    const int64_t begin = s * hop;
    const int64_t n = std::min<int64_t>(F * hop, e->wave.numel() - begin);
    if (n > 0) w.narrow(0, 0, n).copy_(e->wave.narrow(0, begin, n));
    wave.push_back(w);
  }
  Batch batch;
  batch.content = torch::stack(content);
  batch.reference = torch::stack(reference);
  batch.f0 = torch::stack(f0);
  batch.voiced = torch::stack(voiced);
  batch.pitch_target = data.pitch_stats.normalize(batch.f0, batch.voiced);
  batch.singer = torch::stack(singer);
  batch.wave = torch::stack(wave);
  return batch;
}

Json LossReport::to_json() const {
  return Json{{"step", step},
              {"L_mel", L_mel},
              {"L_fm", L_fm},
              {"L_adv_g", L_adv_g},
              {"L_adv_d", L_adv_d},
              {"L_hifi", L_hifi},
              {"L_s", L_s},
              {"L_f", L_f},
              {"L_confusion", L_confusion},
              {"L_CPC", L_CPC},
              {"L_CPC_sum", L_CPC_sum},
              {"L_G", L_G},
              {"learning_rate", learning_rate},
              {"flags", {{"no_voiced_frames", no_voiced_frames},
                         {"cpc_degenerate", cpc_degenerate}}}};
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(RunConfig config, Dataset data)
    : config_(std::move(config)), data_(std::move(data)) {
  build();
}

Trainer::Trainer(const Checkpoint& ckpt, Dataset data)
    : config_(run_config_from_json(ckpt.meta.at("config"))), data_(std::move(data)) {
  const auto singers = ckpt.meta.at("singers").get<std::vector<std::string>>();
  if (singers != data_.singers) {
    throw ValidationError("checkpoint singer list does not match the dataset");
  }
  build();
  restore_module(ckpt, "model", *model);
  restore_module(ckpt, "heads", *heads);
  restore_module(ckpt, "cpc", *cpc);
  restore_module(ckpt, "disc", *discriminators);
  generator_opt_->restore(ckpt, "optim.gen");
  discriminator_opt_->restore(ckpt, "optim.disc");
  step_ = ckpt.meta.at("step").get<int64_t>();
}

void Trainer::build() {
  if (data_.examples.empty()) throw ValidationError("dataset is empty");
  config_.model.content_dim = data_.examples.front().content.size(1);
  config_.model.reference_dim = data_.examples.front().reference.size(1);
  config_.model.num_singers = static_cast<int64_t>(data_.singers.size());
  config_.validate();

  torch::manual_seed(config_.seed);
  model = SvcModel(config_.model);
  heads = ConfusionHeads(config_.model);
  cpc = CpcModule(config_.model, config_.cpc);
  discriminators = DiscriminatorBank(config_.model);

  const Adam::Options opts{config_.train.adam_beta1, config_.train.adam_beta2,
                           config_.train.adam_eps};
  auto gen = named_params("model", *model);
  for (auto& p : named_params("heads", *heads)) gen.push_back(p);
  for (auto& p : named_params("cpc", *cpc)) gen.push_back(p);
  generator_opt_ = std::make_unique<Adam>(std::move(gen), opts);
  discriminator_opt_ = std::make_unique<Adam>(named_params("disc", *discriminators), opts);
}

double Trainer::learning_rate() const {
  const auto& t = config_.train;
  return t.learning_rate * std::pow(t.lr_decay, static_cast<double>(step_ / t.lr_decay_every));
}

GeneratorForward Trainer::forward_generator(const Batch& batch) {
  GeneratorForward out;
  out.encoded = model->encode(batch.content, batch.reference);
  out.wave = model->decode(out.encoded, batch.singer, batch.f0, batch.voiced);
  return out;
}

double Trainer::discriminator_update(const Batch& batch, const torch::Tensor& fake) {
  discriminator_opt_->zero_grad();
  const auto real = discriminators->forward(batch.wave);
  const auto gen = discriminators->forward(fake.detach());
  const auto loss = discriminator_adversarial_loss(scores_of(real), scores_of(gen));
  const double value = loss.item<double>();
  if (!std::isfinite(value)) {
    throw NonFiniteLoss("non-finite L_adv_d at step " + std::to_string(step_));
  }
  loss.backward();
  discriminator_opt_->step(learning_rate());
  return value;
}

LossReport Trainer::generator_update(const Batch& batch, const GeneratorForward& fwd) {
  generator_opt_->zero_grad();
  LossReport r;
  r.step = step_;
  r.learning_rate = learning_rate();

  const auto l_mel = mel_loss(batch.wave, fwd.wave);
  std::vector<DiscriminatorOutput> real;
  {
    torch::NoGradGuard no_grad;
    real = discriminators->forward(batch.wave);
  }
  const auto fake = discriminators->forward(fwd.wave);
  const auto l_fm = feature_matching_loss(real, fake);
  const auto l_adv = generator_adversarial_loss(scores_of(fake));

  const auto ref = fwd.encoded.reference_part();
  const auto logits =
      heads->singer_classifier->forward(reversal_boundary(ref, config_.confusion.lambda));
  const auto l_s = singer_ce(logits, batch.singer);
  const auto pred = heads->pitch_predictor->forward(reversal_boundary(ref, config_.confusion.omega))
                        .squeeze(-1);
  const auto pitch = pitch_mse(pred, batch.pitch_target, batch.voiced);
  r.no_voiced_frames = pitch.no_voiced_frames;

  const auto context = cpc->context->forward(fwd.encoded.frames);
  auto cpc_raw = l_mel * 0.0;
  int64_t terms = 0;
  bool degenerate = true;
  for (int64_t b = 0; b < fwd.encoded.frames.size(0); ++b) {
    const auto negatives = sample_negatives(
        batch.frames(), config_.cpc.K, config_.cpc.n_neg,
        derive_seed({config_.seed, static_cast<uint64_t>(step_), static_cast<uint64_t>(b),
                     kNegativeTag}));
    const auto l = cpc_loss(fwd.encoded.frames[b], context[b], cpc->projections, negatives,
                            config_.cpc.beta);
    cpc_raw = cpc_raw + l.raw;
    terms += l.terms;
    degenerate = degenerate && l.degenerate;
  }
  const auto cpc_mean = terms > 0 ? cpc_raw / static_cast<double>(terms) : cpc_raw;
  r.cpc_degenerate = degenerate;

  const std::pair<const char*, const torch::Tensor*> parts[] = {
      {"L_mel", &l_mel}, {"L_fm", &l_fm},       {"L_adv_g", &l_adv},
      {"L_s", &l_s},     {"L_f", &pitch.value}, {"L_CPC", &cpc_mean}};
  for (const auto& [name, t] : parts) {
    if (!std::isfinite(t->item<double>())) {
      throw NonFiniteLoss(std::string("non-finite ") + name + " at step " +
                          std::to_string(step_));
    }
  }

  const auto& tc = config_.train;
  const auto objective = tc.mel_weight * l_mel + tc.fm_weight * l_fm + l_adv + l_s +
                         pitch.value + cpc_mean;
  objective.backward();
  generator_opt_->step(r.learning_rate);

  r.L_mel = l_mel.item<double>();
  r.L_fm = l_fm.item<double>();
  r.L_adv_g = l_adv.item<double>();
  r.L_s = l_s.item<double>();
  r.L_f = pitch.value.item<double>();
  r.L_CPC = cpc_mean.item<double>();
  r.L_CPC_sum = cpc_raw.item<double>();
  r.L_hifi = tc.mel_weight * r.L_mel + tc.fm_weight * r.L_fm + r.L_adv_g;
  r.L_confusion = confusion_loss(r.L_s, r.L_f, config_.confusion);
  r.L_G = r.L_hifi + r.L_confusion + r.L_CPC;
  return r;
}

LossReport Trainer::train_step(const Batch& batch) {
  model->train();
  const auto fwd = forward_generator(batch);
  const double l_d = discriminator_update(batch, fwd.wave);
  auto r = generator_update(batch, fwd);
  r.L_adv_d = l_d;
  ++step_;
  return r;
}

LossReport Trainer::step() { return train_step(make_batch(data_, config_, step_)); }

void store_dataset_meta(Checkpoint& ckpt, const Dataset& data) {
  ckpt.meta["singers"] = data.singers;
  ckpt.meta["codebook_temperature"] = data.codebook.temperature;
  ckpt.meta["pitch_stats"] = {{"mean", data.pitch_stats.mean},
                              {"stddev", data.pitch_stats.stddev}};
  ckpt.meta["content_kind"] = to_string(data.content_kind);
  ckpt.meta["reference_kind"] = to_string(data.reference_kind);
  ckpt.meta["version"] = version_string();
  ckpt.blobs["codebook.centers"] = data.codebook.centers.clone();
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta["format"] = "svc-checkpoint";
  ckpt.meta["config"] = to_json(config_);
  ckpt.meta["step"] = step_;
  ckpt.meta["seed"] = config_.seed;
  store_dataset_meta(ckpt, data_);
  store_module(ckpt, "model", *model);
  store_module(ckpt, "heads", *heads);
  store_module(ckpt, "cpc", *cpc);
  store_module(ckpt, "disc", *discriminators);
  generator_opt_->store(ckpt, "optim.gen");
  discriminator_opt_->store(ckpt, "optim.disc");
  return ckpt;
}

void Trainer::fit(const std::filesystem::path& out_dir, std::optional<int64_t> until,
                  const std::function<void(const LossReport&)>& on_step) {
  std::filesystem::create_directories(out_dir);
  const int64_t target = until.value_or(config_.train.max_steps);
  std::ofstream log(out_dir / "loss_log.jsonl", std::ios::app);
  auto save = [&] {
    const auto ckpt = checkpoint();
    ckpt.save(out_dir / ("ckpt_" + std::to_string(step_) + ".svck"));
    ckpt.save(out_dir / "latest.svck");
  };
  while (step_ < target) {
    const auto r = step();
    log << r.to_json().dump() << '\n';
    if (on_step) on_step(r);
    if (config_.train.checkpoint_interval > 0 && step_ % config_.train.checkpoint_interval == 0) {
      log.flush();
      save();
    }
  }
  save();
}

std::filesystem::path fit(const DatasetManifest& manifest, const RunConfig& config,
                          const std::filesystem::path& out_dir,
                          const std::optional<std::filesystem::path>& features_dir,
                          const std::optional<std::filesystem::path>& resume) {
  if (manifest.entries.empty()) throw ValidationError("manifest is empty");
  config.validate();
  DatasetManifest train = manifest;
  if (config.train.split) {
    train = manifest.subset(Split::kTrain, config.seed);
    train.base_dir = manifest.base_dir;
    if (train.entries.empty()) throw ValidationError("training split is empty");
  }

  std::unique_ptr<Trainer> trainer;
  if (resume) {
    const auto ckpt = Checkpoint::load(*resume);
    Codebook cb{ckpt.blob("codebook.centers").clone(),
                ckpt.meta.at("codebook_temperature").get<double>()};
    auto resumed = run_config_from_json(ckpt.meta.at("config"));
    auto data = load_dataset(train, resumed, features_dir, cb);
    use_singer_list(data, manifest.singers());
    trainer = std::make_unique<Trainer>(ckpt, std::move(data));
  } else {
    auto data = load_dataset(train, config, features_dir);
    use_singer_list(data, manifest.singers());
    trainer = std::make_unique<Trainer>(config, std::move(data));
  }
  trainer->fit(out_dir, config.train.max_steps);
  return out_dir / ("ckpt_" + std::to_string(trainer->current_step()) + ".svck");
}

}  // namespace svc
