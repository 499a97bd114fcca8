#include "svc/config.hpp"

#include <fstream>
#include <set>

#include "svc/audio.hpp"

#ifndef SVC_VERSION
#define SVC_VERSION "unknown"
#endif

namespace svc {
namespace {

struct Writer {
  Json& out;
  template <typename T> void operator()(const char* key, const T& value) {
    out[key] = value;
  }
};

// Reads the keys present in `j` into the fields, leaving absent ones at their
// current value.
struct Reader {
  const Json& in;
  std::string prefix;
  std::set<std::string> seen;

  template <typename T> void operator()(const char* key, T& value) {
    auto it = in.find(key);
    if (it == in.end()) return;
    seen.insert(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw std::invalid_argument("expected boolean");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!it->is_number()) throw std::invalid_argument("expected number");
        if constexpr (std::is_integral_v<T>) {
          if (!it->is_number_integer() && !it->is_number_unsigned()) {
            throw std::invalid_argument("expected integer");
          }
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw std::invalid_argument("expected string");
      }
      value = it->template get<T>();
    } catch (const std::exception& e) {
      throw ValidationError("config key '" + prefix + key + "': " + e.what());
    }
  }

  void reject_unknown() const {
    for (auto it = in.begin(); it != in.end(); ++it) {
      if (!seen.count(it.key())) {
        throw ValidationError("unknown config key '" + prefix + it.key() + "'");
      }
    }
  }
};

template <typename S> Json section_to_json(const S& s) {
  Json j = Json::object();
  Writer w{j};
  const_cast<S&>(s).visit(w);
  return j;
}

template <typename S>
void section_from_json(S& s, const Json& j, const std::string& name) {
  if (!j.is_object()) {
    throw ValidationError("config key '" + name + "' must be an object");
  }
  Reader r{j, name + ".", {}};
  s.visit(r);
  r.reject_unknown();
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ValidationError("config key '" + key + "': " + what);
}

}  // namespace

int64_t ModelConfig::hop() const {
  int64_t p = 1;
  for (auto f : upsample_factors) p *= f;
  return p;
}

void RunConfig::validate() const {
  require(features.codebook_size >= 1, "features.codebook_size", "must be >= 1");
  require(features.voicing_threshold > 0 && features.voicing_threshold < 1,
          "features.voicing_threshold", "must lie in (0, 1)");
  require(features.rms_gate >= 0, "features.rms_gate", "must be >= 0");
  require(model.hop() == kHopSize, "model.upsample_factors",
          "product must equal the hop size 240");
  for (auto f : model.upsample_factors) {
    require(f >= 1, "model.upsample_factors", "factors must be positive");
  }
  require(model.content_dim >= 1, "model.content_dim", "must be >= 1");
  require(model.reference_dim >= 1, "model.reference_dim", "must be >= 1");
  require(model.num_singers >= 2, "model.num_singers",
          "singer classification needs at least 2 singers");
  require(model.bank_size >= 1, "model.bank_size", "must be >= 1");
  require(model.recurrent_width >= 1, "model.recurrent_width", "must be >= 1");
  require(model.decoder_channels >= (1 << model.upsample_factors.size()),
          "model.decoder_channels", "too small for the number of upsampling stages");
  require(!model.resblock_dilations.empty(), "model.resblock_dilations",
          "must not be empty");
  require(model.harmonics >= 1, "model.harmonics", "must be >= 1");
  require(!model.mpd_channels.empty(), "model.mpd_channels", "must not be empty");
  require(!model.msd_channels.empty(), "model.msd_channels", "must not be empty");
  require(model.msd_scales >= 1, "model.msd_scales", "must be >= 1");
  require(confusion.lambda >= 0, "confusion.lambda", "must be >= 0");
  require(confusion.omega >= 0, "confusion.omega", "must be >= 0");
  require(cpc.K >= 1, "cpc.K", "must be >= 1");
  require(cpc.n_neg >= 0, "cpc.n_neg", "must be >= 0");
  require(cpc.beta >= 0, "cpc.beta", "must be >= 0");
  require(train.learning_rate > 0, "train.learning_rate", "must be positive");
  require(train.batch_size >= 1, "train.batch_size", "must be positive");
  require(train.max_steps >= 0, "train.max_steps", "must be >= 0");
  require(train.segment_frames >= 1, "train.segment_frames", "must be positive");
  require(train.checkpoint_interval >= 1, "train.checkpoint_interval",
          "must be positive");
  require(train.lr_decay_every >= 1, "train.lr_decay_every", "must be positive");
  require(train.adam_beta1 >= 0 && train.adam_beta1 < 1, "train.adam_beta1",
          "must lie in [0, 1)");
  require(train.adam_beta2 >= 0 && train.adam_beta2 < 1, "train.adam_beta2",
          "must lie in [0, 1)");
}

RunConfig make_profile(const std::string& name) {
  RunConfig c;
  c.profile = name;
  if (name == "desk") return c;
  if (name == "paper") {
    c.model.bank_size = 8;
    c.model.bank_channels = 128;
    c.model.projection_channels = 128;
    c.model.highway_layers = 4;
    c.model.recurrent_width = 128;
    c.model.singer_dim = 64;
    c.model.decoder_channels = 256;
    c.model.head_channels = 128;
    c.model.context_width = 256;
    c.model.mpd_channels = {8, 32, 128, 256, 256};
    c.model.msd_channels = {32, 64, 256, 256};
    c.train.batch_size = 16;
    c.train.max_steps = 400000;
    c.train.checkpoint_interval = 10000;
    return c;
  }
  throw ValidationError("unknown profile '" + name + "' (expected desk or paper)");
}

Json to_json(const RunConfig& c) {
  Json j;
  j["profile"] = c.profile;
  j["seed"] = c.seed;
  j["features"] = section_to_json(c.features);
  j["model"] = section_to_json(c.model);
  j["confusion"] = section_to_json(c.confusion);
  j["cpc"] = section_to_json(c.cpc);
  j["train"] = section_to_json(c.train);
  return j;
}

RunConfig merge_json(RunConfig c, const Json& j) {
  if (!j.is_object()) throw ValidationError("config root must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    if (key == "profile") {
      if (!it->is_string()) throw ValidationError("config key 'profile': expected string");
      c.profile = it->get<std::string>();
    } else if (key == "seed") {
      if (!it->is_number_integer() && !it->is_number_unsigned()) {
        throw ValidationError("config key 'seed': expected integer");
      }
      c.seed = it->get<uint64_t>();
    } else if (key == "features") {
      section_from_json(c.features, *it, key);
    } else if (key == "model") {
      section_from_json(c.model, *it, key);
    } else if (key == "confusion") {
      section_from_json(c.confusion, *it, key);
    } else if (key == "cpc") {
      section_from_json(c.cpc, *it, key);
    } else if (key == "train") {
      section_from_json(c.train, *it, key);
    } else {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }
  return c;
}

RunConfig run_config_from_json(const Json& j) {
  const std::string profile =
      j.contains("profile") && j["profile"].is_string() ? j["profile"].get<std::string>()
                                                        : "desk";
  return merge_json(make_profile(profile), j);
}

RunConfig load_run_config(const std::string& path, const std::string& profile) {
  RunConfig c = make_profile(profile);
  if (path.empty()) return c;
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("config file " + path + " is not valid JSON: " + e.what());
  }
  return merge_json(std::move(c), j);
}

RunConfig apply_override(RunConfig config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ValidationError("override '" + assignment +
                          "' must look like section.key=value");
  }
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;
  }
  Json patch;
  patch[section][key] = value;
  return merge_json(std::move(config), patch);
}

std::string version_string() { return SVC_VERSION; }

}  // namespace svc
