#include "tier/synth_data.hpp"

#include <algorithm>

#include <json.hpp>

#include "tier/io.hpp"
#include "tier/parallel.hpp"
#include "tier/rng.hpp"

namespace tier {

namespace {

constexpr char kMagic[8] = {'T', 'I', 'E', 'R', 'D', 'A', 'T', 'A'};
constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::uint64_t kSampleTag = 0xDA7A5E7ULL;

const char* kClassNames[] = {"blob",   "ring",  "stripe", "cross", "wedge",  "dot",
                             "checker", "bar",   "spiral", "arch",  "notch",  "speck"};

}  // namespace

void DataConfig::validate() const {
  if (classes == 0) throw ConfigError("data config: need at least one object class");
  if (min_objects < 1 || max_objects < min_objects) {
    throw ConfigError("data config: object count range invalid");
  }
  if (classes < max_objects) {
    throw ConfigError("data config: catalog smaller than max objects per image");
  }
  if (max_objects > patches()) {
    throw ConfigError("data config: more objects than patches");
  }
  if (1 + max_objects + max_filler > max_len) {
    throw ConfigError("data config: captions cannot exceed max_len");
  }
  if (vocab_needed() > 65535) throw ConfigError("data config: vocabulary too large");
  if (noise_sigma < 0.0) throw ConfigError("data config: noise sigma must be non-negative");
}

std::vector<ClassSpec> default_catalog(const DataConfig& cfg) {
  std::vector<ClassSpec> catalog(cfg.classes);
  const std::size_t named = sizeof(kClassNames) / sizeof(kClassNames[0]);
  for (std::size_t i = 0; i < cfg.classes; ++i) {
    ClassSpec& spec = catalog[i];
    spec.name = i < named ? kClassNames[i] : "class" + std::to_string(i);
    spec.token = static_cast<std::uint16_t>(2 + i);
    spec.tile_bits = rng::mix(0x7115ULL, spec.token);
  }
  return catalog;
}

SyntheticSample generate_sample(const DataConfig& cfg, const std::vector<ClassSpec>& catalog,
                                std::uint32_t sample_id) {
  if (catalog.empty()) throw ConfigError("generate_sample: empty class catalog");
  rng::Stream stream(rng::mix(cfg.seed, kSampleTag, sample_id));
  SyntheticSample sample;
  sample.id = sample_id;

  const std::size_t m =
      cfg.min_objects + stream.index(cfg.max_objects - cfg.min_objects + 1);
  if (catalog.size() < m) throw ConfigError("generate_sample: catalog smaller than object count");

  // distinct classes and distinct patches via partial Fisher-Yates
  std::vector<std::size_t> class_pool(catalog.size());
  for (std::size_t i = 0; i < class_pool.size(); ++i) class_pool[i] = i;
  std::vector<std::size_t> patch_pool(cfg.patches());
  for (std::size_t i = 0; i < patch_pool.size(); ++i) patch_pool[i] = i;
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(class_pool[i], class_pool[i + stream.index(class_pool.size() - i)]);
    std::swap(patch_pool[i], patch_pool[i + stream.index(patch_pool.size() - i)]);
  }

  // background noise everywhere, then one tile per object patch
  const std::size_t side = cfg.image_side();
  sample.pixels = Tensor({side, side});
  for (std::size_t i = 0; i < sample.pixels.numel(); ++i) {
    sample.pixels[i] = stream.uniform(0.0, cfg.noise_sigma);
  }
  const std::size_t s = cfg.patch_size;
  for (std::size_t i = 0; i < m; ++i) {
    const ClassSpec& spec = catalog[class_pool[i]];
    const std::size_t patch = patch_pool[i];
    const std::size_t py = (patch / cfg.grid) * s;
    const std::size_t px = (patch % cfg.grid) * s;
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) {
        if ((spec.tile_bits >> ((y * s + x) % 64)) & 1ULL) {
          sample.pixels[(py + y) * side + (px + x)] += 1.0;
        }
      }
    }
    sample.labels |= 1ULL << class_pool[i];
  }
  // pixels are stored as f32 in the container; quantize now so the in-memory
  // dataset and a written-then-read one are identical bit for bit
  for (std::size_t i = 0; i < sample.pixels.numel(); ++i) {
    sample.pixels[i] = static_cast<double>(static_cast<float>(sample.pixels[i]));
  }

  // caption: [CLS], shuffled object tokens, 0..max_filler filler tokens, padding
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  stream.shuffle(order);
  sample.tokens.assign(cfg.max_len, kPadToken);
  sample.tokens[0] = kClsToken;
  std::vector<std::size_t> token_patch;  // ground-truth patch per caption row, SIZE_MAX for none
  token_patch.push_back(SIZE_MAX);       // [CLS]
  for (std::size_t i = 0; i < m; ++i) {
    sample.tokens[1 + i] = catalog[class_pool[order[i]]].token;
    token_patch.push_back(patch_pool[order[i]]);
  }
  const std::size_t filler = stream.index(cfg.max_filler + 1);
  for (std::size_t i = 0; i < filler; ++i) {
    sample.tokens[1 + m + i] =
        static_cast<std::uint16_t>(2 + cfg.classes + stream.index(cfg.filler_vocab));
    token_patch.push_back(SIZE_MAX);
  }
  sample.token_count = 1 + m + filler;

  sample.alignment.assign(sample.token_count * cfg.patches(), 0);
  for (std::size_t row = 0; row < sample.token_count; ++row) {
    if (token_patch[row] != SIZE_MAX) {
      sample.alignment[row * cfg.patches() + token_patch[row]] = 1;
    }
  }
  return sample;
}

Dataset generate_dataset(const DataConfig& cfg) {
  cfg.validate();
  Dataset dataset;
  dataset.manifest.config = cfg;
  dataset.manifest.catalog = default_catalog(cfg);
  const std::size_t total = cfg.count_train + cfg.count_val + cfg.count_test;
  dataset.samples.resize(total);
  parallel_for(total, [&](std::size_t i) {
    dataset.samples[i] = generate_sample(cfg, dataset.manifest.catalog,
                                         static_cast<std::uint32_t>(i));
  });
  return dataset;
}

std::span<const SyntheticSample> Dataset::split(const std::string& name) const {
  if (name == "train") return train();
  if (name == "val") return val();
  if (name == "test") return test();
  throw ConfigError("unknown split: " + name);
}

// ==================== manifest json ====================

std::string DatasetManifest::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = format_version;
  j["seed"] = config.seed;
  j["counts"] = {{"train", config.count_train}, {"val", config.count_val},
                 {"test", config.count_test}};
  j["classes"] = config.classes;
  j["filler_vocab"] = config.filler_vocab;
  j["noise_sigma"] = config.noise_sigma;
  j["grid"] = config.grid;
  j["patch_size"] = config.patch_size;
  j["max_len"] = config.max_len;
  j["min_objects"] = config.min_objects;
  j["max_objects"] = config.max_objects;
  j["max_filler"] = config.max_filler;
  nlohmann::ordered_json cat = nlohmann::ordered_json::array();
  for (const ClassSpec& spec : catalog) {
    cat.push_back({{"name", spec.name}, {"token", spec.token}, {"tile", spec.tile_bits}});
  }
  j["catalog"] = cat;
  return j.dump();
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw IntegrityError("dataset manifest: invalid JSON");
  DatasetManifest m;
  try {
    m.format_version = j.at("format_version").get<std::uint32_t>();
    m.config.seed = j.at("seed").get<std::uint64_t>();
    m.config.count_train = j.at("counts").at("train").get<std::size_t>();
    m.config.count_val = j.at("counts").at("val").get<std::size_t>();
    m.config.count_test = j.at("counts").at("test").get<std::size_t>();
    m.config.classes = j.at("classes").get<std::size_t>();
    m.config.filler_vocab = j.at("filler_vocab").get<std::size_t>();
    m.config.noise_sigma = j.at("noise_sigma").get<double>();
    m.config.grid = j.at("grid").get<std::size_t>();
    m.config.patch_size = j.at("patch_size").get<std::size_t>();
    m.config.max_len = j.at("max_len").get<std::size_t>();
    m.config.min_objects = j.at("min_objects").get<std::size_t>();
    m.config.max_objects = j.at("max_objects").get<std::size_t>();
    m.config.max_filler = j.at("max_filler").get<std::size_t>();
    for (const auto& entry : j.at("catalog")) {
      ClassSpec spec;
      spec.name = entry.at("name").get<std::string>();
      spec.token = entry.at("token").get<std::uint16_t>();
      spec.tile_bits = entry.at("tile").get<std::uint64_t>();
      m.catalog.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("dataset manifest: ") + e.what());
  }
  return m;
}

// ==================== container io ====================

void write_dataset(const Dataset& dataset, const std::string& path) {
  io::Buffer buf;
  buf.raw(kMagic, sizeof(kMagic));
  buf.u32(kDatasetVersion);
  buf.str(dataset.manifest.to_json());
  buf.u32(static_cast<std::uint32_t>(dataset.samples.size()));
  const std::size_t patches = dataset.manifest.config.patches();
  for (const SyntheticSample& sample : dataset.samples) {
    io::Buffer rec;
    rec.u32(sample.id);
    for (std::size_t i = 0; i < sample.pixels.numel(); ++i) {
      rec.f32(static_cast<float>(sample.pixels[i]));
    }
    rec.u16(static_cast<std::uint16_t>(sample.tokens.size()));
    for (std::uint16_t t : sample.tokens) rec.u16(t);
    rec.u16(static_cast<std::uint16_t>(sample.token_count));
    // alignment as packed bits
    const std::size_t bits = sample.token_count * patches;
    std::vector<std::uint8_t> packed((bits + 7) / 8, 0);
    for (std::size_t b = 0; b < bits; ++b) {
      if (sample.alignment[b]) packed[b / 8] |= static_cast<std::uint8_t>(1u << (b % 8));
    }
    rec.raw(packed.data(), packed.size());
    rec.u64(sample.labels);
    buf.u32(static_cast<std::uint32_t>(rec.size()));
    buf.raw(rec.bytes().data(), rec.size());
    buf.u32(io::crc32(rec.bytes().data(), rec.size()));
  }
  io::write_file(path, buf.bytes());
}

Dataset read_dataset(const std::string& path) {
  std::vector<std::uint8_t> bytes = io::read_file(path);
  io::Cursor cur(bytes);
  const std::uint8_t* magic = cur.raw(sizeof(kMagic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IntegrityError("dataset: bad magic");
  }
  std::uint32_t version = cur.u32();
  if (version != kDatasetVersion) {
    throw IntegrityError("dataset: unsupported version " + std::to_string(version));
  }
  Dataset dataset;
  dataset.manifest = DatasetManifest::from_json(cur.str());
  const DataConfig& cfg = dataset.manifest.config;
  const std::size_t side = cfg.image_side();
  const std::size_t patches = cfg.patches();
  std::uint32_t count = cur.u32();
  if (count != cfg.count_train + cfg.count_val + cfg.count_test) {
    throw IntegrityError("dataset: record count does not match manifest");
  }
  dataset.samples.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    std::uint32_t rec_len;
    try {
      rec_len = cur.u32();
    } catch (const IntegrityError&) {
      throw IntegrityError("dataset: truncated at record " + std::to_string(r), r);
    }
    const std::uint8_t* payload;
    std::uint32_t stored;
    try {
      payload = cur.raw(rec_len);
      stored = cur.u32();
    } catch (const IntegrityError&) {
      throw IntegrityError("dataset: truncated at record " + std::to_string(r), r);
    }
    if (io::crc32(payload, rec_len) != stored) {
      throw IntegrityError("dataset: checksum mismatch in record " + std::to_string(r), r);
    }
    io::Cursor rec(payload, rec_len);
    SyntheticSample sample;
    sample.id = rec.u32();
    sample.pixels = Tensor({side, side});
    for (std::size_t i = 0; i < sample.pixels.numel(); ++i) {
      sample.pixels[i] = static_cast<double>(rec.f32());
    }
    std::uint16_t token_len = rec.u16();
    if (token_len != cfg.max_len) {
      throw IntegrityError("dataset: caption length mismatch in record " + std::to_string(r), r);
    }
    sample.tokens.resize(token_len);
    for (std::uint16_t i = 0; i < token_len; ++i) sample.tokens[i] = rec.u16();
    sample.token_count = rec.u16();
    const std::size_t bits = sample.token_count * patches;
    const std::uint8_t* packed = rec.raw((bits + 7) / 8);
    sample.alignment.assign(bits, 0);
    for (std::size_t b = 0; b < bits; ++b) {
      sample.alignment[b] = (packed[b / 8] >> (b % 8)) & 1u;
    }
    sample.labels = rec.u64();
    if (rec.remaining() != 0) {
      throw IntegrityError("dataset: trailing bytes in record " + std::to_string(r), r);
    }
    dataset.samples.push_back(std::move(sample));
  }
  return dataset;
}

}  // namespace tier
