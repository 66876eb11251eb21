#include "ffl/bundle.hpp"

#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "ffl/synthesis.hpp"

namespace ffl {

using json = nlohmann::json;

DatasetCard DatasetCard::of(const Dataset& d) {
  if (!d.topology) throw BundleError("dataset has no topology");
  DatasetCard c;
  c.n_id = d.n_id;
  c.n_exp = d.n_exp;
  c.vertex_count = d.vertex_count();
  c.units = d.units;
  c.expression_names = d.expression_names;
  c.normalization = d.normalization;
  c.topology = d.topology;
  return c;
}

json DatasetCard::to_json() const {
  json j;
  j["version"] = 1;
  j["n_id"] = n_id;
  j["n_exp"] = n_exp;
  j["vertex_count"] = vertex_count;
  j["units"] = units;
  j["expression_names"] = expression_names;
  j["normalization"] = normalization ? normalization_to_json(*normalization) : json(nullptr);
  j["topology_id"] = topology ? topology->id : "";
  std::vector<std::uint32_t> faces;
  if (topology) faces.assign(topology->faces.data(), topology->faces.data() + topology->faces.size());
  j["faces"] = faces;
  return j;
}

DatasetCard DatasetCard::from_json(const json& j) {
  DatasetCard c;
  try {
    c.n_id = j.at("n_id").get<int>();
    c.n_exp = j.at("n_exp").get<int>();
    c.vertex_count = j.at("vertex_count").get<Index>();
    c.units = j.value("units", "mm");
    c.expression_names = j.value("expression_names", std::vector<std::string>{});
    if (j.contains("normalization") && !j.at("normalization").is_null())
      c.normalization = normalization_from_json(j.at("normalization"));
    const auto faces = j.at("faces").get<std::vector<std::uint32_t>>();
    if (faces.size() % 3 != 0) throw BundleError("card faces length is not a multiple of 3");
    auto topo = std::make_shared<Topology>();
    topo->id = j.value("topology_id", "");
    topo->vertex_count = c.vertex_count;
    topo->faces = Eigen::Map<const FaceMatrix>(faces.data(), static_cast<Index>(faces.size() / 3), 3);
    if (topo->faces.size() && topo->faces.maxCoeff() >= static_cast<std::uint32_t>(c.vertex_count))
      throw BundleError("card face index out of range");
    c.topology = std::move(topo);
  } catch (const json::exception& e) {
    throw BundleError(std::string("malformed dataset card: ") + e.what());
  }
  return c;
}

void check_bundle(const SAEModel& sae, const ShapeGAN& gan, const DatasetCard& card) {
  try {
    check_compatible(sae, gan);
  } catch (const DimensionError& e) {
    throw BundleError(std::string("inconsistent bundle: ") + e.what());
  }
  if (card.vertex_count != sae.arch.vertex_count)
    throw BundleError("inconsistent bundle: dataset card V = " + std::to_string(card.vertex_count) +
                      ", SAE decoder V = " + std::to_string(sae.arch.vertex_count));
  if (card.n_id != sae.arch.n_id || card.n_exp != sae.arch.n_exp)
    throw BundleError("inconsistent bundle: dataset card (n_id " + std::to_string(card.n_id) + ", n_exp " +
                      std::to_string(card.n_exp) + "), models (n_id " + std::to_string(sae.arch.n_id) + ", n_exp " +
                      std::to_string(sae.arch.n_exp) + ")");
  if (!card.topology || card.topology->vertex_count != card.vertex_count)
    throw BundleError("inconsistent bundle: card topology does not match its vertex count");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

namespace {

std::string bundle_hash(const std::string& sae, const std::string& gan, const std::string& card) {
  return sha256_hex(sha256_hex(sae) + sha256_hex(gan) + sha256_hex(card));
}

}  // namespace

void save_bundle(const std::filesystem::path& dir, const SAEModel& sae, const ShapeGAN& gan, const DatasetCard& card) {
  check_bundle(sae, gan, card);
  std::filesystem::create_directories(dir);
  save_sae(sae, dir / "sae.ffl");
  save_gan(gan, dir / "gan.ffl");
  write_file(dir / "card.json", card.to_json().dump(1) + "\n");
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  for (const char* f : {"sae.ffl", "gan.ffl", "card.json"})
    if (!std::filesystem::exists(dir / f)) throw BundleError("bundle " + dir.string() + " is missing " + f);
  const std::string sae_bytes = read_file(dir / "sae.ffl");
  const std::string gan_bytes = read_file(dir / "gan.ffl");
  const std::string card_bytes = read_file(dir / "card.json");
  auto as_span = [](const std::string& s) {
    return std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
  };
  ModelBundle b;
  b.sae = sae_from_checkpoint(deserialize(as_span(sae_bytes)));
  b.gan = gan_from_checkpoint(deserialize(as_span(gan_bytes)));
  json card;
  try {
    card = json::parse(card_bytes);
  } catch (const json::exception& e) {
    throw BundleError(std::string("card.json is not valid JSON: ") + e.what());
  }
  b.card = DatasetCard::from_json(card);
  check_bundle(b.sae, b.gan, b.card);
  b.hash = bundle_hash(sae_bytes, gan_bytes, card_bytes);
  return b;
}

}  // namespace ffl
