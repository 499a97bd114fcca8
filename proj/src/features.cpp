#include "svc/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "svc/rng.hpp"

namespace svc {

size_t PitchTrack::voiced_count() const {
  return static_cast<size_t>(std::count(voiced.begin(), voiced.end(), 1));
}

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kPseudoPpg: return "pseudo_ppg";
    case FeatureKind::kExternalPpg: return "external_ppg";
    case FeatureKind::kExternalPpgMid: return "external_ppg_mid";
    case FeatureKind::kExternalHubert: return "external_hubert";
    case FeatureKind::kExternalMel: return "external_mel";
    case FeatureKind::kMel: return "mel";
    case FeatureKind::kPitch: return "pitch";
  }
  return "unknown";
}

FeatureKind feature_kind_from_code(uint8_t code) {
  if (code > static_cast<uint8_t>(FeatureKind::kPitch)) {
    throw ValidationError("unknown feature kind code " + std::to_string(code));
  }
  return static_cast<FeatureKind>(code);
}

FeatureKind feature_kind_from_string(const std::string& name) {
  for (uint8_t c = 0; c <= static_cast<uint8_t>(FeatureKind::kPitch); ++c) {
    if (to_string(static_cast<FeatureKind>(c)) == name) {
      return static_cast<FeatureKind>(c);
    }
  }
  throw ValidationError("unknown feature kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// Mel spectrogram

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

namespace {

std::vector<double> mel_edges_hz() {
  const double top = hz_to_mel(kMelMaxHz);
  std::vector<double> edges(kNumMels + 2);
  for (int i = 0; i < kNumMels + 2; ++i) {
    edges[i] = mel_to_hz(top * i / (kNumMels + 1));
  }
  return edges;
}

}  // namespace

MelFrontend::MelFrontend() {
  // Periodic Hann of 40 ms, centered inside the 1024-point FFT frame.
  std::vector<float> win(kFftSize, 0.0f);
  const int offset = (kFftSize - kWindowSize) / 2;
  for (int n = 0; n < kWindowSize; ++n) {
    win[offset + n] = static_cast<float>(
        0.5 - 0.5 * std::cos(2.0 * M_PI * n / kWindowSize));
  }
  window_ = torch::tensor(win);

  const int bins = kFftSize / 2 + 1;
  const auto edges = mel_edges_hz();
  std::vector<float> fb(static_cast<size_t>(kNumMels) * bins, 0.0f);
  for (int m = 0; m < kNumMels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * kSampleRate / kFftSize;
      const double w = std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid));
      if (w > 0.0) fb[static_cast<size_t>(m) * bins + k] = static_cast<float>(w);
    }
  }
  filterbank_ = torch::tensor(fb).reshape({kNumMels, bins});
}

std::vector<double> MelFrontend::band_centers_hz() const {
  const auto edges = mel_edges_hz();
  return {edges.begin() + 1, edges.end() - 1};
}

const MelFrontend& MelFrontend::instance() {
  static const MelFrontend frontend;
  return frontend;
}

torch::Tensor MelFrontend::forward(const torch::Tensor& waves) const {
  const bool batched = waves.dim() == 2;
  auto x = batched ? waves : waves.unsqueeze(0);
  x = torch::constant_pad_nd(x, {kFftSize / 2, kFftSize / 2}, 0.0);
  auto spec = torch::stft(x, kFftSize, kHopSize, kFftSize, window_,
                          /*normalized=*/false, /*onesided=*/true,
                          /*return_complex=*/true);
  auto power = torch::real(spec).square() + torch::imag(spec).square();
  // power: [B, 513, T] -> mel: [B, T, 80]
  auto mel = torch::matmul(filterbank_, power).transpose(1, 2);
  auto out = torch::log(torch::clamp_min(mel, kMelFloor));
  return batched ? out : out.squeeze(0);
}

MelSpectrogram extract_mel(const AudioClip& clip) {
  validate_clip(clip);
  torch::NoGradGuard no_grad;
  auto wave = torch::from_blob(const_cast<float*>(clip.samples.data()),
                               {static_cast<int64_t>(clip.size())},
                               torch::kFloat32);
  return {MelFrontend::instance().forward(wave).contiguous()};
}

// ---------------------------------------------------------------------------
// F0

PitchTrack extract_f0(const AudioClip& clip, const F0Config& config) {
  validate_clip(clip);
  const int64_t frames = frame_count(clip.size());
  const int min_lag = static_cast<int>(std::floor(kSampleRate / config.max_hz));
  const int max_lag = static_cast<int>(std::ceil(kSampleRate / config.min_hz));
  const int half = kWindowSize / 2;

  PitchTrack track;
  track.f0_hz.assign(frames, 0.0f);
  track.voiced.assign(frames, 0);

  std::vector<double> x(kWindowSize);
  std::vector<double> prefix(kWindowSize + 1);
  std::vector<double> r(max_lag + 2, 0.0);
  const auto n = static_cast<int64_t>(clip.size());

  for (int64_t t = 0; t < frames; ++t) {
    const int64_t start = t * kHopSize - half;
    double energy = 0.0;
    for (int i = 0; i < kWindowSize; ++i) {
      const int64_t idx = start + i;
      x[i] = (idx >= 0 && idx < n) ? clip.samples[idx] : 0.0;
      energy += x[i] * x[i];
    }
    if (std::sqrt(energy / kWindowSize) < config.rms_gate) continue;

    prefix[0] = 0.0;
    for (int i = 0; i < kWindowSize; ++i) prefix[i + 1] = prefix[i] + x[i] * x[i];

    double best = -1.0;
    for (int lag = min_lag - 1; lag <= max_lag + 1; ++lag) {
      const int len = kWindowSize - lag;
      double dot = 0.0;
      for (int i = 0; i < len; ++i) dot += x[i] * x[i + lag];
      const double e0 = prefix[len];
      const double e1 = prefix[kWindowSize] - prefix[lag];
      r[lag] = (e0 > 0.0 && e1 > 0.0) ? dot / std::sqrt(e0 * e1) : 0.0;
      if (lag >= min_lag && lag <= max_lag) best = std::max(best, r[lag]);
    }
    if (best < config.voicing_threshold) continue;

    // The first local peak close to the global maximum; later peaks at
    // multiples of the period are nearly as tall and would halve F0.
    int chosen = -1;
    for (int lag = min_lag; lag <= max_lag; ++lag) {
      if (r[lag] >= 0.9 * best && r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1]) {
        chosen = lag;
        break;
      }
    }
    if (chosen < 0) continue;
    if (r[chosen] < config.voicing_threshold) continue;

    double refined = chosen;
    const double a = r[chosen - 1], b = r[chosen], c = r[chosen + 1];
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) refined += std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    const double f0 = kSampleRate / refined;
    if (f0 < config.min_hz || f0 > config.max_hz) continue;
    track.f0_hz[t] = static_cast<float>(f0);
    track.voiced[t] = 1;
  }
  return track;
}

// ---------------------------------------------------------------------------
// Codebook

Codebook fit_codebook(std::span<const MelSpectrogram> mels, int64_t num_centers,
                      uint64_t seed, double temperature) {
  if (num_centers < 1) throw ValidationError("codebook size must be >= 1");
  std::vector<torch::Tensor> parts;
  for (const auto& m : mels) {
    if (m.frames.dim() != 2 || m.frames.size(1) != kNumMels) {
      throw ValidationError("codebook input must be T x 80 mel frames");
    }
    parts.push_back(m.frames.to(torch::kFloat64));
  }
  const int64_t total = parts.empty() ? 0 : [&] {
    int64_t s = 0;
    for (const auto& p : parts) s += p.size(0);
    return s;
  }();
  if (total < 10 * num_centers) {
    throw ValidationError("codebook fitting needs at least " +
                          std::to_string(10 * num_centers) + " frames, got " +
                          std::to_string(total));
  }
  torch::NoGradGuard no_grad;
  const auto data = torch::cat(parts, 0).contiguous();
  const auto sq = data.square().sum(1);

  auto sq_dist = [&](const torch::Tensor& centers) {
    auto d = sq.unsqueeze(1) - 2.0 * torch::matmul(data, centers.t()) +
             centers.square().sum(1).unsqueeze(0);
    return torch::clamp_min(d, 0.0);
  };

  // k-means++ seeding.
  Rng rng(seed);
  std::vector<int64_t> picked{static_cast<int64_t>(rng.below(total))};
  auto nearest = sq_dist(data.index({picked[0]}).unsqueeze(0)).squeeze(1);
  while (static_cast<int64_t>(picked.size()) < num_centers) {
    const auto* w = nearest.data_ptr<double>();
    const double sum = std::accumulate(w, w + total, 0.0);
    if (!(sum > 0.0)) {
      throw ValidationError("fewer distinct frames than codebook size " +
                            std::to_string(num_centers));
    }
    const double target = rng.uniform() * sum;
    double acc = 0.0;
    int64_t choice = total - 1;
    for (int64_t i = 0; i < total; ++i) {
      acc += w[i];
      if (acc > target && w[i] > 0.0) {
        choice = i;
        break;
      }
    }
    picked.push_back(choice);
    nearest = torch::minimum(
        nearest, sq_dist(data.index({choice}).unsqueeze(0)).squeeze(1));
  }
  auto centers = data.index({torch::tensor(picked)}).clone();

  for (int iter = 0; iter < 100; ++iter) {
    const auto assign = sq_dist(centers).argmin(1);
    auto sums = torch::zeros_like(centers).index_add_(0, assign, data);
    auto counts = torch::zeros({num_centers}, torch::kFloat64)
                      .index_add_(0, assign, torch::ones({total}, torch::kFloat64));
    const auto nonempty = counts > 0;
    auto updated = torch::where(nonempty.unsqueeze(1),
                                sums / counts.clamp_min(1.0).unsqueeze(1), centers);
    const double shift = (updated - centers).norm(2, 1).max().item<double>();
    centers = updated;
    if (shift < 1e-6) break;
  }

  if (temperature <= 0.0) {
    const auto d = std::get<0>(sq_dist(centers).min(1));
    temperature = std::get<0>(d.median(0)).item<double>();
    if (!(temperature > 0.0)) temperature = 1.0;
  }
  return {centers.to(torch::kFloat32).contiguous(), temperature};
}

ContentFeature pseudo_content(const MelSpectrogram& mel, const Codebook& cb) {
  if (!cb.centers.defined() || cb.size() < 1) {
    throw ValidationError("codebook is not fitted");
  }
  if (mel.frames.dim() != 2 || mel.frames.size(1) != cb.centers.size(1)) {
    throw ValidationError("mel dimension " + std::to_string(mel.frames.size(-1)) +
                          " does not match codebook dimension " +
                          std::to_string(cb.centers.size(1)));
  }
  torch::NoGradGuard no_grad;
  const auto x = mel.frames.to(torch::kFloat64);
  const auto c = cb.centers.to(torch::kFloat64);
  const auto d = (x.unsqueeze(1) - c.unsqueeze(0)).square().sum(2);
  const auto post = torch::softmax(-d / cb.temperature, 1);
  return {post.to(torch::kFloat32).contiguous(), FeatureKind::kPseudoPpg};
}

// ---------------------------------------------------------------------------
// SVCF files

std::vector<char> encode_feature_file(const torch::Tensor& frames,
                                      FeatureKind kind) {
  if (frames.dim() != 2) throw ValidationError("feature matrix must be 2-D");
  const auto f = frames.to(torch::kFloat32).contiguous();
  const auto rows = static_cast<uint32_t>(f.size(0));
  const auto cols = static_cast<uint32_t>(f.size(1));
  const size_t payload = static_cast<size_t>(rows) * cols * sizeof(float);
  std::vector<char> out(13 + payload);
  std::memcpy(out.data(), "SVCF", 4);
  std::memcpy(out.data() + 4, &rows, 4);
  std::memcpy(out.data() + 8, &cols, 4);
  out[12] = static_cast<char>(kind);
  if (payload > 0) std::memcpy(out.data() + 13, f.data_ptr<float>(), payload);
  return out;
}

FeatureFile decode_feature_file(std::span<const char> bytes) {
  if (bytes.size() < 13) {
    throw ValidationError("malformed feature header: expected at least 13 bytes, got " +
                          std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), "SVCF", 4) != 0) {
    throw ValidationError("malformed feature header: bad magic");
  }
  uint32_t rows, cols;
  std::memcpy(&rows, bytes.data() + 4, 4);
  std::memcpy(&cols, bytes.data() + 8, 4);
  const auto kind = feature_kind_from_code(static_cast<uint8_t>(bytes[12]));
  if (cols == 0) throw ValidationError("feature dimension is 0");
  const size_t expected = 13 + static_cast<size_t>(rows) * cols * sizeof(float);
  if (bytes.size() != expected) {
    throw ValidationError("feature file size mismatch: expected " +
                          std::to_string(expected) + " bytes, got " +
                          std::to_string(bytes.size()));
  }
  auto frames = torch::empty({static_cast<int64_t>(rows), static_cast<int64_t>(cols)},
                             torch::kFloat32);
  if (rows > 0) {
    std::memcpy(frames.data_ptr<float>(), bytes.data() + 13, expected - 13);
  }
  if (torch::isnan(frames).any().item<bool>()) {
    throw ValidationError("feature file contains NaN values");
  }
  return {frames, kind};
}

void write_feature_file(const std::filesystem::path& path,
                        const torch::Tensor& frames, FeatureKind kind) {
  const auto bytes = encode_feature_file(frames, kind);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

FeatureFile read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open feature file " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  try {
    return decode_feature_file(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

torch::Tensor resample_frames(const torch::Tensor& frames, int64_t target_frames) {
  const int64_t src = frames.size(0);
  if (src == target_frames) return frames;
  if (src == 0 || target_frames <= 0) {
    throw ValidationError("cannot resample an empty feature matrix");
  }
  std::vector<int64_t> index(target_frames);
  for (int64_t t = 0; t < target_frames; ++t) {
    index[t] = std::min(src - 1, t * src / target_frames);
  }
  return frames.index_select(0, torch::tensor(index)).contiguous();
}

ContentFeature load_external_feature(const std::filesystem::path& path,
                                     FeatureKind kind, int64_t target_frames) {
  auto file = read_feature_file(path);
  return {resample_frames(file.frames, target_frames), kind};
}

torch::Tensor pitch_to_tensor(const PitchTrack& pitch) {
  auto out = torch::zeros({static_cast<int64_t>(pitch.size()), 2}, torch::kFloat32);
  auto acc = out.accessor<float, 2>();
  for (size_t t = 0; t < pitch.size(); ++t) {
    acc[t][0] = pitch.f0_hz[t];
    acc[t][1] = pitch.voiced[t] ? 1.0f : 0.0f;
  }
  return out;
}

PitchTrack pitch_from_tensor(const torch::Tensor& frames) {
  if (frames.dim() != 2 || frames.size(1) != 2) {
    throw ValidationError("pitch matrix must be T x 2");
  }
  const auto f = frames.to(torch::kFloat32).contiguous();
  auto acc = f.accessor<float, 2>();
  PitchTrack p;
  for (int64_t t = 0; t < f.size(0); ++t) {
    const bool v = acc[t][1] > 0.5f && acc[t][0] > 0.0f;
    p.f0_hz.push_back(v ? acc[t][0] : 0.0f);
    p.voiced.push_back(v ? 1 : 0);
  }
  return p;
}

}  // namespace svc
