#include "ffl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ffl {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  if (pos + sizeof(U) > in.size()) throw CheckpointError("checkpoint truncated");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(in[pos + i]) << (8 * i);
  pos += sizeof(U);
  return std::bit_cast<T>(bits);
}

}  // namespace

nlohmann::json specs_to_json(const std::vector<LayerSpec>& specs) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : specs) {
    j.push_back({{"in", s.in},
                 {"out", s.out},
                 {"activation", s.activation == Activation::leaky_relu ? "leaky_relu" : "identity"},
                 {"bias", s.bias}});
  }
  return j;
}

std::vector<LayerSpec> specs_from_json(const nlohmann::json& j) {
  std::vector<LayerSpec> specs;
  for (const auto& e : j) {
    LayerSpec s;
    s.in = e.at("in").get<Index>();
    s.out = e.at("out").get<Index>();
    const auto act = e.at("activation").get<std::string>();
    if (act == "leaky_relu")
      s.activation = Activation::leaky_relu;
    else if (act == "identity")
      s.activation = Activation::identity;
    else
      throw CheckpointError("unknown activation '" + act + "'");
    s.bias = e.at("bias").get<bool>();
    specs.push_back(s);
  }
  return specs;
}

void Checkpoint::add_net(const std::string& prefix, const DenseNet<double>& net) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    add_matrix(prefix + ".layers." + std::to_string(i) + ".weight", l.weight);
    if (l.has_bias()) add_matrix(prefix + ".layers." + std::to_string(i) + ".bias", l.bias);
  }
}

void Checkpoint::add_matrix(const std::string& name, const Eigen::MatrixXd& m) {
  tensors.push_back({name, m.rows(), m.cols(), std::vector<double>(m.data(), m.data() + m.size())});
}

const TensorBlob& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw CheckpointError("checkpoint has no tensor '" + name + "'");
}

Eigen::MatrixXd Checkpoint::matrix(const std::string& name) const {
  const TensorBlob& t = tensor(name);
  return Eigen::Map<const Eigen::MatrixXd>(t.data.data(), t.rows, t.cols);
}

DenseNet<double> Checkpoint::net(const std::string& prefix, const std::vector<LayerSpec>& specs) const {
  DenseNet<double> net(specs);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& l = net.layers[i];
    const std::string base = prefix + ".layers." + std::to_string(i);
    Eigen::MatrixXd w = matrix(base + ".weight");
    if (w.rows() != l.weight.rows() || w.cols() != l.weight.cols())
      throw CheckpointError(base + ".weight is " + dims(w.rows(), w.cols()) + ", architecture says " +
                            dims(l.weight.rows(), l.weight.cols()));
    l.weight = std::move(w);
    if (l.has_bias()) {
      Eigen::MatrixXd b = matrix(base + ".bias");
      if (b.rows() != l.bias.size() || b.cols() != 1) throw CheckpointError(base + ".bias has the wrong shape");
      l.bias = b.col(0);
    }
  }
  return net;
}

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["kind"] = ckpt.kind;
  header["architecture"] = ckpt.architecture;
  header["byte_order"] = "little";
  header["element_order"] = "column-major";
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : ckpt.tensors) {
    if (static_cast<Index>(t.data.size()) != t.rows * t.cols)
      throw CheckpointError("tensor '" + t.name + "' has inconsistent size");
    header["tensors"].push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  }
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
  put_le(out, kCheckpointVersion);
  put_le(out, ckpt.n_id);
  put_le(out, ckpt.n_exp);
  put_le(out, ckpt.vertex_count);
  put_le(out, static_cast<std::uint64_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : ckpt.tensors)
    for (double v : t.data) put_le(out, v);
  return out;
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw CheckpointError("not a checkpoint (bad magic)");
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.n_id = get_le<std::uint32_t>(bytes, pos);
  ckpt.n_exp = get_le<std::uint32_t>(bytes, pos);
  ckpt.vertex_count = get_le<std::uint32_t>(bytes, pos);
  const auto len = get_le<std::uint64_t>(bytes, pos);
  if (pos + len > bytes.size()) throw CheckpointError("checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  pos += len;
  ckpt.kind = header.at("kind").get<std::string>();
  ckpt.architecture = header.at("architecture");
  for (const auto& t : header.at("tensors")) {
    TensorBlob blob;
    blob.name = t.at("name").get<std::string>();
    blob.rows = t.at("rows").get<Index>();
    blob.cols = t.at("cols").get<Index>();
    const auto count = static_cast<std::size_t>(blob.rows * blob.cols);
    if (pos + 8 * count > bytes.size()) throw CheckpointError("tensor '" + blob.name + "' truncated");
    blob.data.resize(count);
    for (auto& v : blob.data) v = get_le<double>(bytes, pos);
    ckpt.tensors.push_back(std::move(blob));
  }
  if (pos != bytes.size()) throw CheckpointError("trailing bytes after checkpoint tensors");
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace ffl
