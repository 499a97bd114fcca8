#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "svc/eval.hpp"
#include "svc/extract.hpp"
#include "svc/features.hpp"
#include "svc/inference.hpp"
#include "svc/toy_corpus.hpp"
#include "svc/trainer.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace svc;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

AudioClip clip_from(const FloatArray& samples, int sample_rate) {
  if (samples.ndim() != 1) throw ValidationError("audio must be a 1-D array");
  AudioClip clip;
  clip.samples.assign(samples.data(), samples.data() + samples.size());
  clip.sample_rate = sample_rate;
  return clip;
}

FloatArray to_numpy(const torch::Tensor& t) {
  const auto c = t.to(torch::kFloat32).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  FloatArray out(shape);
  std::memcpy(out.mutable_data(), c.data_ptr<float>(), sizeof(float) * c.numel());
  return out;
}

FloatArray to_numpy(const std::vector<float>& v) {
  FloatArray out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

torch::Tensor from_numpy(const FloatArray& a) {
  std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<float*>(a.data()), shape, torch::kFloat32).clone();
}

PitchTrack track_from(const FloatArray& f0, const py::array_t<uint8_t>& voiced) {
  if (f0.size() != voiced.size()) throw ValidationError("f0 and voiced lengths differ");
  PitchTrack p;
  p.f0_hz.assign(f0.data(), f0.data() + f0.size());
  p.voiced.assign(voiced.data(), voiced.data() + voiced.size());
  return p;
}

RunConfig config_from(const std::string& json) { return run_config_from_json(Json::parse(json)); }

}  // namespace

PYBIND11_MODULE(_svcpy, m) {
  m.doc() = "Singing voice conversion core";
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  m.def("version", &version_string);
  m.def("frame_count", [](size_t n) { return frame_count(n); }, py::arg("num_samples"));
  m.def("profile", [](const std::string& name) { return to_json(make_profile(name)).dump(); },
        py::arg("name") = "desk");
  m.def("validate_config", [](const std::string& json) { return to_json(config_from(json)).dump(); },
        py::arg("config"));

  m.def("read_wav", [](const fs::path& path) {
    const auto clip = read_wav(path);
    return py::make_tuple(to_numpy(clip.samples), clip.sample_rate);
  }, py::arg("path"));
  m.def("write_wav", [](const fs::path& path, const FloatArray& samples, int sample_rate, bool as_float) {
    write_wav(path, clip_from(samples, sample_rate), as_float ? WavEncoding::kFloat32 : WavEncoding::kPcm16);
  }, py::arg("path"), py::arg("samples"), py::arg("sample_rate") = kSampleRate,
     py::arg("as_float") = false);

  m.def("extract_mel", [](const FloatArray& samples, int sample_rate) {
    return to_numpy(extract_mel(clip_from(samples, sample_rate)).frames);
  }, py::arg("samples"), py::arg("sample_rate") = kSampleRate);
  m.def("extract_f0", [](const FloatArray& samples, int sample_rate) {
    const auto p = extract_f0(clip_from(samples, sample_rate));
    py::array_t<uint8_t> voiced(static_cast<py::ssize_t>(p.voiced.size()));
    std::copy(p.voiced.begin(), p.voiced.end(), voiced.mutable_data());
    return py::make_tuple(to_numpy(p.f0_hz), voiced);
  }, py::arg("samples"), py::arg("sample_rate") = kSampleRate);
  m.def("fit_codebook", [](const std::vector<FloatArray>& mels, int64_t size, uint64_t seed) {
    std::vector<MelSpectrogram> ms;
    for (const auto& a : mels) ms.push_back({from_numpy(a)});
    const auto cb = fit_codebook(ms, size, seed);
    return py::make_tuple(to_numpy(cb.centers), cb.temperature);
  }, py::arg("mels"), py::arg("size"), py::arg("seed") = 0);
  m.def("pseudo_content", [](const FloatArray& mel, const FloatArray& centers, double temperature) {
    return to_numpy(pseudo_content({from_numpy(mel)}, {from_numpy(centers), temperature}).frames);
  }, py::arg("mel"), py::arg("centers"), py::arg("temperature"));

  m.def("write_feature_file", [](const fs::path& path, const FloatArray& frames, const std::string& kind) {
    write_feature_file(path, from_numpy(frames), feature_kind_from_string(kind));
  }, py::arg("path"), py::arg("frames"), py::arg("kind"));
  m.def("read_feature_file", [](const fs::path& path) {
    const auto f = read_feature_file(path);
    return py::make_tuple(to_numpy(f.frames), to_string(f.kind));
  }, py::arg("path"));

  m.def("ncc", [](const DoubleArray& a, const DoubleArray& b) {
    const auto r = ncc(std::span<const double>(a.data(), a.size()), std::span<const double>(b.data(), b.size()));
    return r.degenerate ? std::optional<double>() : std::optional<double>(r.value);
  }, py::arg("a"), py::arg("b"));
  m.def("ncc_tracks", [](const FloatArray& f0_a, const py::array_t<uint8_t>& voiced_a,
                         const FloatArray& f0_b, const py::array_t<uint8_t>& voiced_b, bool log_f0) {
    const auto r = ncc(track_from(f0_a, voiced_a), track_from(f0_b, voiced_b), log_f0);
    return r.degenerate ? std::optional<double>() : std::optional<double>(r.value);
  }, py::arg("f0_a"), py::arg("voiced_a"), py::arg("f0_b"), py::arg("voiced_b"),
     py::arg("log_f0") = false);
  m.def("cos_sim", [](const DoubleArray& x, const DoubleArray& y) {
    return cos_sim(std::span<const double>(x.data(), x.size()), std::span<const double>(y.data(), y.size()));
  }, py::arg("x"), py::arg("y"));

  m.def("make_toy_corpus", [](const fs::path& out, int singers, int clips, double seconds, uint64_t seed) {
    write_toy_corpus({singers, clips, seconds, seed}, out);
    return out / "manifest.jsonl";
  }, py::arg("out"), py::arg("singers") = 2, py::arg("clips") = 5, py::arg("seconds") = 1.0,
     py::arg("seed") = 7);

  m.def("extract_features", [](const fs::path& manifest, const fs::path& out, const std::string& config) {
    const auto c = config_from(config);
    ExtractionReport r;
    {
      py::gil_scoped_release release;
      r = extract_features(read_manifest(manifest), out, c);
    }
    py::dict d;
    d["written"] = r.files_written;
    d["skipped"] = r.files_skipped;
    d["errors"] = r.errors;
    return d;
  }, py::arg("manifest"), py::arg("out"), py::arg("config"));

  m.def("train", [](const fs::path& manifest, const fs::path& out, const std::string& config,
                    std::optional<fs::path> features, std::optional<fs::path> resume) {
    const auto c = config_from(config);
    py::gil_scoped_release release;
    return fit(read_manifest(manifest), c, out, features, resume);
  }, py::arg("manifest"), py::arg("out"), py::arg("config"), py::arg("features") = py::none(),
     py::arg("resume") = py::none());

  py::class_<ConversionModel>(m, "ConversionModel")
      .def_static("load", &ConversionModel::load, py::arg("path"))
      .def_property_readonly("singers", &ConversionModel::singers)
      .def_property_readonly("config", [](const ConversionModel& self) { return to_json(self.config()).dump(); })
      .def("convert", [](const ConversionModel& self, const FloatArray& samples, const std::string& singer,
                         double f0_ratio, int sample_rate) {
        const auto clip = clip_from(samples, sample_rate);
        ConversionOptions options;
        options.f0_ratio = f0_ratio;
        AudioClip out;
        {
          py::gil_scoped_release release;
          out = self.convert(clip, singer, options);
        }
        return to_numpy(out.samples);
      }, py::arg("samples"), py::arg("singer"), py::arg("f0_ratio") = 1.0,
         py::arg("sample_rate") = kSampleRate);
}
