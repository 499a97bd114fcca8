#include "svc/eval.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "svc/optim.hpp"
#include "svc/rng.hpp"

namespace svc {

NccResult ncc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("ncc inputs differ in length");
  NccResult r;
  r.frames = static_cast<int64_t>(a.size());
  double ab = 0, aa = 0, bb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (a.empty() || aa <= 0 || bb <= 0) {
    r.degenerate = true;
    return r;
  }
  r.value = std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
  return r;
}

NccResult ncc(const PitchTrack& a, const PitchTrack& b, bool log_f0) {
  const PitchTrack* lo = &a;
  const PitchTrack* hi = &b;
  if (lo->size() > hi->size()) std::swap(lo, hi);
  const size_t n = hi->size(), m = lo->size();
  std::vector<double> xa, xb;
  if (m == 0) return {0.0, 0, true};
  for (size_t t = 0; t < n; ++t) {
    const size_t s = m == n ? t : t * m / n;
    if (!hi->voiced[t] || !lo->voiced[s]) continue;
    double u = hi->f0_hz[t], v = lo->f0_hz[s];
    if (log_f0) {
      if (u <= 0 || v <= 0) continue;
      u = std::log(u);
      v = std::log(v);
    }
    xa.push_back(u);
    xb.push_back(v);
  }
  return ncc(xa, xb);
}

double cos_sim(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("cos_sim inputs differ in dimension");
  double xy = 0, xx = 0, yy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx <= 0 || yy <= 0) throw ValidationError("cos_sim of a zero vector is undefined");
  return std::clamp(xy / std::sqrt(xx * yy), -1.0, 1.0);
}

double cos_sim(const torch::Tensor& x, const torch::Tensor& y) {
  const auto a = x.detach().to(torch::kFloat64).contiguous().flatten();
  const auto b = y.detach().to(torch::kFloat64).contiguous().flatten();
  return cos_sim(std::span<const double>(a.data_ptr<double>(), a.numel()),
                 std::span<const double>(b.data_ptr<double>(), b.numel()));
}

// ---------------------------------------------------------------------------
// SpeakerEmbedder

struct SpeakerEmbedder::Net : torch::nn::Module {
  Net(int64_t channels, int64_t dim, int64_t classes) {
    conv1 = register_module("conv1", torch::nn::Conv1d(torch::nn::Conv1dOptions(kNumMels, channels, 5).padding(2)));
    conv2 = register_module("conv2", torch::nn::Conv1d(torch::nn::Conv1dOptions(channels, channels, 5).padding(2)));
    penultimate = register_module("penultimate", torch::nn::Linear(channels, dim));
    classifier = register_module("classifier", torch::nn::Linear(dim, classes));
  }

  // [B, T, 80] -> [B, dim], time-averaged penultimate activations.
  torch::Tensor pooled(const torch::Tensor& mel) {
    auto h = torch::relu(conv1->forward(mel.transpose(1, 2)));
    h = torch::relu(conv2->forward(h)).transpose(1, 2);
    return torch::tanh(penultimate->forward(h)).mean(1);
  }

  torch::nn::Conv1d conv1{nullptr}, conv2{nullptr};
  torch::nn::Linear penultimate{nullptr}, classifier{nullptr};
};

SpeakerEmbedder::SpeakerEmbedder(const std::vector<LabeledClip>& clips,
                                 const EmbedderConfig& config)
    : config_(config) {
  if (clips.empty()) throw ValidationError("speaker embedder needs training clips");
  std::set<std::string> names;
  for (const auto& c : clips) names.insert(c.singer);
  singers_.assign(names.begin(), names.end());

  std::vector<torch::Tensor> mels;
  std::vector<int64_t> labels;
  int64_t min_frames = config.segment_frames;
  double sum = 0, sq = 0;
  int64_t count = 0;
  for (const auto& c : clips) {
    const auto m = extract_mel(c.clip).frames;
    mels.push_back(m);
    labels.push_back(std::find(singers_.begin(), singers_.end(), c.singer) - singers_.begin());
    min_frames = std::min(min_frames, m.size(0));
    sum += m.sum().item<double>();
    sq += m.square().sum().item<double>();
    count += m.numel();
  }
  mean_ = sum / count;
  const double var = sq / count - mean_ * mean_;
  scale_ = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;

  torch::manual_seed(config.seed);
  net_ = std::make_shared<Net>(config.channels, config.dim,
                               static_cast<int64_t>(singers_.size()));
  Adam opt(named_params("embedder", *net_), Adam::Options{});
  for (int64_t step = 0; step < config.steps; ++step) {
    Rng rng(derive_seed({config.seed, static_cast<uint64_t>(step)}));
    std::vector<torch::Tensor> xs;
    std::vector<int64_t> ys;
    for (int64_t b = 0; b < config.batch_size; ++b) {
      const auto i = rng.below(mels.size());
      const auto start = static_cast<int64_t>(rng.below(mels[i].size(0) - min_frames + 1));
      xs.push_back(mels[i].narrow(0, start, min_frames));
      ys.push_back(labels[i]);
    }
    const auto x = (torch::stack(xs) - mean_) * scale_;
    const auto y = torch::tensor(ys, torch::kInt64);
    opt.zero_grad();
    const auto loss = torch::cross_entropy_loss(net_->classifier->forward(net_->pooled(x)), y);
    loss.backward();
    opt.step(config.learning_rate);
  }
  net_->eval();
}

torch::Tensor SpeakerEmbedder::embed(const MelSpectrogram& mel) const {
  torch::NoGradGuard no_grad;
  const auto x = (mel.frames.unsqueeze(0) - mean_) * scale_;
  const auto e = net_->pooled(x).squeeze(0);
  return e / e.norm().clamp_min(1e-12);
}

torch::Tensor SpeakerEmbedder::embed(const AudioClip& clip) const {
  return embed(extract_mel(clip));
}

std::map<std::string, torch::Tensor> singer_centroids(const SpeakerEmbedder& embedder,
                                                      const std::vector<LabeledClip>& clips) {
  std::map<std::string, torch::Tensor> sums;
  for (const auto& c : clips) {
    const auto e = embedder.embed(c.clip);
    auto it = sums.find(c.singer);
    if (it == sums.end()) {
      sums.emplace(c.singer, e.clone());
    } else {
      it->second += e;
    }
  }
  for (auto& [name, v] : sums) v = v / v.norm().clamp_min(1e-12);
  return sums;
}

// ---------------------------------------------------------------------------
// Reports

Json MetricReport::to_json() const {
  Json rows = Json::array();
  for (const auto& p : pairs) {
    Json r = {{"source", p.source},
              {"source_singer", p.source_singer},
              {"target_singer", p.target_singer}};
    if (!p.error.empty()) {
      r["error"] = p.error;
    } else {
      r["ncc"] = p.ncc.degenerate ? Json(nullptr) : Json(p.ncc.value);
      r["ncc_frames"] = p.ncc.frames;
      r["ncc_degenerate"] = p.ncc.degenerate;
      r["cos_sim"] = p.cos_sim;
      r["target_ranked_first"] = p.target_ranked_first;
    }
    rows.push_back(r);
  }
  return {{"ncc", ncc},
          {"cos_sim", cos_sim},
          {"evaluated", evaluated},
          {"degenerate", degenerate},
          {"failed", failed},
          {"ranked_first", ranked_first},
          {"pairs", rows},
          {"provenance", provenance}};
}

std::string MetricReport::table() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %-12s %-12s %8s %8s\n", "source", "source_singer",
                "target", "NCC", "COS-SIM");
  out << line;
  for (const auto& p : pairs) {
    const auto name = std::filesystem::path(p.source).filename().string();
    if (!p.error.empty()) {
      std::snprintf(line, sizeof line, "%-28s %-12s %-12s %8s %8s\n", name.c_str(),
                    p.source_singer.c_str(), p.target_singer.c_str(), "error", "-");
    } else if (p.ncc.degenerate) {
      std::snprintf(line, sizeof line, "%-28s %-12s %-12s %8s %8.3f\n", name.c_str(),
                    p.source_singer.c_str(), p.target_singer.c_str(), "n/a", p.cos_sim);
    } else {
      std::snprintf(line, sizeof line, "%-28s %-12s %-12s %8.3f %8.3f\n", name.c_str(),
                    p.source_singer.c_str(), p.target_singer.c_str(), p.ncc.value, p.cos_sim);
    }
    out << line;
  }
  std::snprintf(line, sizeof line, "%-54s %8.3f %8.3f\n", "mean", ncc, cos_sim);
  out << line;
  return out.str();
}

MetricReport evaluate_conversion(const std::vector<LabeledClip>& test,
                                 const ConversionModel& model,
                                 const SpeakerEmbedder& embedder,
                                 const std::map<std::string, torch::Tensor>& centroids,
                                 const EvalOptions& options) {
  MetricReport report;
  report.provenance = {{"config", to_json(model.config())}, {"version", version_string()}};
  F0Config f0c;
  f0c.voicing_threshold = model.config().features.voicing_threshold;
  f0c.rms_gate = model.config().features.rms_gate;
  double ncc_sum = 0, cos_sum = 0;
  int64_t ncc_n = 0;
  for (const auto& clip : test) {
    std::vector<std::string> targets;
    if (options.self_only) {
      targets.push_back(clip.singer);
    } else {
      targets = model.singers();
    }
    std::optional<PitchTrack> source_f0;
    for (const auto& target : targets) {
      PairResult p;
      p.source = clip.id;
      p.source_singer = clip.singer;
      p.target_singer = target;
      try {
        if (!source_f0) source_f0 = extract_f0(clip.clip, f0c);
        ConversionOptions co;
        co.source_path = clip.id;
        const auto out = model.convert(clip.clip, target, co);
        p.ncc = ncc(*source_f0, extract_f0(out, f0c), options.log_f0);
        const auto e = embedder.embed(out);
        auto it = centroids.find(target);
        if (it == centroids.end()) throw ValidationError("no reference clips for " + target);
        p.cos_sim = cos_sim(e, it->second);
        p.target_ranked_first = true;
        for (const auto& [name, c] : centroids) {
          if (name != target && cos_sim(e, c) >= p.cos_sim) p.target_ranked_first = false;
        }
      } catch (const std::exception& ex) {
        p.error = ex.what();
        ++report.failed;
        report.pairs.push_back(p);
        continue;
      }
      ++report.evaluated;
      cos_sum += p.cos_sim;
      if (p.target_ranked_first) ++report.ranked_first;
      if (p.ncc.degenerate) {
        ++report.degenerate;
      } else {
        ncc_sum += p.ncc.value;
        ++ncc_n;
      }
      report.pairs.push_back(p);
    }
  }
  report.ncc = ncc_n ? ncc_sum / ncc_n : 0.0;
  report.cos_sim = report.evaluated ? cos_sum / report.evaluated : 0.0;
  return report;
}

}  // namespace svc
