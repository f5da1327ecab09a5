#include "seqcrf/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

namespace seqcrf {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'Q', 'C', 'R', 'F', '0', '1'};

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}
std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

struct Slot {
  std::string name;
  std::vector<float>* data;
  Shape shape;
};

std::vector<Slot> slots(SequenceModel<float>& model) {
  std::vector<Slot> out;
  for (auto* p : model.parameters()) out.push_back({p->name, &p->value.data, p->value.shape});
  auto& norm = model.norm_state();
  out.push_back({"norm.mean", &norm.mean, {norm.mean.size()}});
  out.push_back({"norm.var", &norm.var, {norm.var.size()}});
  return out;
}

}  // namespace

void write_checkpoint(std::ostream& out, SequenceModel<float>& model, const Vocabulary& vocab,
                      const nlohmann::json& config) {
  const auto arrays = slots(model);
  nlohmann::json listing = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& s : arrays) {
    listing.push_back({{"name", s.name}, {"shape", s.shape}, {"offset", offset}, {"count", s.data->size()}});
    offset += s.data->size();
  }
  const nlohmann::json manifest = {{"format", "seqcrf-checkpoint"},
                                   {"version", kCheckpointVersion},
                                   {"dtype", "float32-le"},
                                   {"model", model.describe()},
                                   {"vocabulary", vocab.tokens()},
                                   {"arrays", listing},
                                   {"config", config}};
  const std::string text = manifest.dump();
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = to_le(static_cast<std::uint64_t>(text.size()));
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<std::uint32_t> buf;
  for (const auto& s : arrays) {
    buf.resize(s.data->size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_le(std::bit_cast<std::uint32_t>((*s.data)[i]));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  }
  if (!out) throw CheckpointError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in, std::string_view source) {
  auto fail = [&](const std::string& what) -> CheckpointError {
    return CheckpointError("checkpoint '" + std::string(source) + "': " + what);
  };
  char magic[8];
  if (!in.read(magic, sizeof magic)) throw fail("truncated before the magic bytes");
  if (std::memcmp(magic, kMagic, 6) != 0) throw fail("bad magic bytes (not a checkpoint file)");
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw fail("unsupported format revision '" + std::string(magic + 6, 2) + "'");
  }
  std::uint64_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len)) throw fail("truncated manifest length");
  len = to_le(len);
  if (len > (std::uint64_t{1} << 32)) throw fail("manifest length " + std::to_string(len) + " is implausible");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw fail("truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("manifest is not valid JSON: ") + e.what());
  }

  Checkpoint cp;
  try {
    if (manifest.at("format") != "seqcrf-checkpoint") throw fail("unknown format tag");
    const int version = manifest.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw fail("version " + std::to_string(version) + " is not supported (expected " +
                 std::to_string(kCheckpointVersion) + ")");
    }
    const auto& m = manifest.at("model");
    const auto kind = parse_model_kind(m.at("kind").get<std::string>());
    if (!kind) throw fail("unknown model kind");
    ModelDims dims;
    dims.vocab = m.at("vocab").get<std::size_t>();
    dims.embedding = m.at("embedding").get<std::size_t>();
    dims.hidden = m.at("hidden").get<std::size_t>();
    dims.unary_width = m.at("unary_width").get<std::size_t>();
    dims.pairwise_width = m.at("pairwise_width").get<std::size_t>();
    dims.beta_width = m.at("beta_width").get<std::size_t>();
    dims.boundary_potentials = m.at("boundary_potentials").get<bool>();
    ModelOptions options;
    options.embedding_dropout = m.at("embedding_dropout").get<double>();
    options.feature_dropout = m.at("feature_dropout").get<double>();
    options.normalize_features = m.at("normalize_features").get<bool>();
    options.constrained_decoding = m.at("constrained_decoding").get<bool>();
    const auto objective = parse_objective(m.at("objective").get<std::string>());
    if (!objective) throw fail("unknown objective");
    options.objective = *objective;
    std::vector<Category> cats;
    for (const auto& name : m.at("categories")) {
      const auto c = parse_category(name.get<std::string>());
      if (!c) throw fail("unknown category '" + name.get<std::string>() + "'");
      cats.push_back(*c);
    }
    cp.vocab = Vocabulary::from_tokens(manifest.at("vocabulary").get<std::vector<std::string>>());
    cp.model = std::make_unique<SequenceModel<float>>(*kind, dims, options, LabelSpace(cats));
    cp.config = manifest.at("config");

    auto arrays = slots(*cp.model);
    const auto& listing = manifest.at("arrays");
    if (listing.size() != arrays.size()) {
      throw fail("manifest lists " + std::to_string(listing.size()) + " arrays, model has " +
                 std::to_string(arrays.size()));
    }
    std::vector<std::uint32_t> buf;
    for (std::size_t i = 0; i < arrays.size(); ++i) {
      const auto& entry = listing[i];
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      if (name != arrays[i].name || shape != arrays[i].shape) {
        throw fail("array " + std::to_string(i) + " is '" + name + "' " + shape_string(shape) + ", expected '" +
                   arrays[i].name + "' " + shape_string(arrays[i].shape));
      }
      buf.resize(arrays[i].data->size());
      if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4))) {
        throw fail("truncated payload in array '" + name + "'");
      }
      for (std::size_t k = 0; k < buf.size(); ++k) (*arrays[i].data)[k] = std::bit_cast<float>(to_le(buf[k]));
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw fail("trailing bytes after payload");
  return cp;
}

void checkpoint_save(const std::string& path, SequenceModel<float>& model, const Vocabulary& vocab,
                     const nlohmann::json& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, model, vocab, config);
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in, path);
}

}  // namespace seqcrf
