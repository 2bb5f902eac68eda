#include "tier/checkpoint.hpp"

#include <cstring>

#include <json.hpp>

#include "tier/io.hpp"

namespace tier {

namespace {
constexpr char kMagic[8] = {'T', 'I', 'E', 'R', 'C', 'K', 'P', 'T'};
}

void TrainConfig::validate() const {
  tier.validate();
  model.validate();
  if (learning_rate <= 0.0) throw ConfigError("train config: learning rate must be positive");
  if (batch_size < 2) throw ConfigError("train config: batch size must be at least 2");
  if (epochs < 0) throw ConfigError("train config: epochs must be non-negative");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0 ||
      adam_eps <= 0.0) {
    throw ConfigError("train config: invalid Adam constants");
  }
}

std::string TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["lambda_p"] = tier.lambda_p;
  j["lambda_t"] = tier.lambda_t;
  j["cls_in_penalty"] = tier.cls_in_penalty;
  j["penalty_averaging"] =
      tier.averaging == PenaltyAveraging::kPerSample ? "per_sample" : "flat";
  j["build_penalty_terms"] = tier.build_penalty_terms;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["dataset_path"] = dataset_path;
  j["checkpoint_every"] = checkpoint_every;
  j["adam_beta1"] = adam_beta1;
  j["adam_beta2"] = adam_beta2;
  j["adam_eps"] = adam_eps;
  j["model"] = {{"grid", model.grid},
                {"patch_size", model.patch_size},
                {"channels", model.channels},
                {"image_feat", model.image_feat},
                {"text_feat", model.text_feat},
                {"hidden", model.hidden},
                {"embed", model.embed},
                {"vocab", model.vocab},
                {"max_len", model.max_len}};
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ConfigError("train config: invalid JSON");
  TrainConfig c;
  try {
    c.tier.lambda_p = j.at("lambda_p").get<double>();
    c.tier.lambda_t = j.at("lambda_t").get<double>();
    c.tier.cls_in_penalty = j.at("cls_in_penalty").get<bool>();
    std::string avg = j.at("penalty_averaging").get<std::string>();
    if (avg == "per_sample") {
      c.tier.averaging = PenaltyAveraging::kPerSample;
    } else if (avg == "flat") {
      c.tier.averaging = PenaltyAveraging::kFlat;
    } else {
      throw ConfigError("train config: unknown penalty_averaging '" + avg + "'");
    }
    c.tier.build_penalty_terms = j.at("build_penalty_terms").get<bool>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.dataset_path = j.at("dataset_path").get<std::string>();
    c.checkpoint_every = j.at("checkpoint_every").get<int>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    const auto& m = j.at("model");
    c.model.grid = m.at("grid").get<std::size_t>();
    c.model.patch_size = m.at("patch_size").get<std::size_t>();
    c.model.channels = m.at("channels").get<std::size_t>();
    c.model.image_feat = m.at("image_feat").get<std::size_t>();
    c.model.text_feat = m.at("text_feat").get<std::size_t>();
    c.model.hidden = m.at("hidden").get<std::size_t>();
    c.model.embed = m.at("embed").get<std::size_t>();
    c.model.vocab = m.at("vocab").get<std::size_t>();
    c.model.max_len = m.at("max_len").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return c;
}

AdamState AdamState::init(const ModelParams& params) {
  AdamState state;
  params.for_each([&](const char* name, const Tensor& t) {
    state.m.emplace_back(name, Tensor(t.shape()));
    state.v.emplace_back(name, Tensor(t.shape()));
  });
  return state;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  io::Buffer buf;
  buf.raw(kMagic, sizeof(kMagic));
  buf.u32(kCheckpointVersion);

  nlohmann::ordered_json meta;
  meta["config"] = nlohmann::ordered_json::parse(ckpt.config.to_json());
  meta["epoch"] = ckpt.epoch;
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const EpochStats& s : ckpt.history) {
    hist.push_back({{"epoch", s.epoch},
                    {"clip", s.loss.clip_loss},
                    {"patch_pen", s.loss.patch_penalty},
                    {"token_pen", s.loss.token_penalty},
                    {"total", s.loss.total}});
  }
  meta["history"] = hist;
  buf.str(meta.dump());

  std::vector<std::pair<std::string, Tensor>> params;
  ckpt.params.for_each([&](const char* name, const Tensor& t) { params.emplace_back(name, t); });
  io::put_tensor_table(buf, params);

  std::vector<std::pair<std::string, Tensor>> opt;
  for (const auto& [name, t] : ckpt.opt.m) opt.emplace_back("adam.m." + name, t);
  for (const auto& [name, t] : ckpt.opt.v) opt.emplace_back("adam.v." + name, t);
  opt.emplace_back("adam.step", Tensor::scalar(static_cast<double>(ckpt.opt.step)));
  io::put_tensor_table(buf, opt);

  io::write_file(path, buf.bytes());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::vector<std::uint8_t> bytes = io::read_file(path);
  io::Cursor cur(bytes);
  const std::uint8_t* magic = cur.raw(sizeof(kMagic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IntegrityError("checkpoint: bad magic");
  }
  std::uint32_t version = cur.u32();
  if (version != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  nlohmann::json meta = nlohmann::json::parse(cur.str(), nullptr, /*allow_exceptions=*/false);
  if (meta.is_discarded()) throw IntegrityError("checkpoint: invalid metadata JSON");
  try {
    ckpt.config = TrainConfig::from_json(meta.at("config").dump());
    ckpt.epoch = meta.at("epoch").get<int>();
    for (const auto& h : meta.at("history")) {
      EpochStats s;
      s.epoch = h.at("epoch").get<int>();
      s.loss.clip_loss = h.at("clip").get<double>();
      s.loss.patch_penalty = h.at("patch_pen").get<double>();
      s.loss.token_penalty = h.at("token_pen").get<double>();
      s.loss.total = h.at("total").get<double>();
      ckpt.history.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint: metadata: ") + e.what());
  }

  auto params = io::get_tensor_table(cur);
  std::size_t next = 0;
  ckpt.params.for_each([&](const char* name, Tensor& t) {
    if (next >= params.size() || params[next].first != name) {
      throw Error(std::string("checkpoint: missing or misordered parameter '") + name + "'");
    }
    t = std::move(params[next].second);
    ++next;
  });
  if (next != params.size()) throw Error("checkpoint: unexpected extra parameters");
  validate_params(ckpt.params, ckpt.config.model);

  auto opt = io::get_tensor_table(cur);
  ckpt.opt = AdamState::init(ckpt.params);
  next = 0;
  for (auto& [name, t] : ckpt.opt.m) {
    if (next >= opt.size() || opt[next].first != "adam.m." + name ||
        !opt[next].second.same_shape(t)) {
      throw Error("checkpoint: optimizer state mismatch at adam.m." + name);
    }
    t = std::move(opt[next].second);
    ++next;
  }
  for (auto& [name, t] : ckpt.opt.v) {
    if (next >= opt.size() || opt[next].first != "adam.v." + name ||
        !opt[next].second.same_shape(t)) {
      throw Error("checkpoint: optimizer state mismatch at adam.v." + name);
    }
    t = std::move(opt[next].second);
    ++next;
  }
  if (next >= opt.size() || opt[next].first != "adam.step") {
    throw Error("checkpoint: missing adam.step");
  }
  ckpt.opt.step = static_cast<std::int64_t>(opt[next].second[0]);
  ++next;
  if (next != opt.size()) throw Error("checkpoint: unexpected extra optimizer entries");
  if (cur.remaining() != 0) throw IntegrityError("checkpoint: trailing bytes");
  return ckpt;
}

}  // namespace tier
