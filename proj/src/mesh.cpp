#include "ffl/mesh.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ffl {

namespace fs = std::filesystem;
using json = nlohmann::json;

void validate(const Mesh& mesh) {
  if (!mesh.topology) throw DatasetError("mesh has no topology");
  if (mesh.vertex_count() != mesh.topology->vertex_count)
    throw DatasetError("vertex-count mismatch: mesh has " + std::to_string(mesh.vertex_count()) +
                       ", topology '" + mesh.topology->id + "' has " +
                       std::to_string(mesh.topology->vertex_count));
  const auto& faces = mesh.topology->faces;
  for (Index i = 0; i < faces.size(); ++i) {
    if (static_cast<Index>(faces(i)) >= mesh.vertex_count())
      throw DatasetError("face index " + std::to_string(faces(i)) + " out of range for " +
                         std::to_string(mesh.vertex_count()) + " vertices");
  }
  if (!mesh.vertices.allFinite()) throw DatasetError("mesh has non-finite coordinates");
}

ExpressionCode ExpressionCode::one_hot(Index n, Index k, double level) {
  if (k < 0 || k >= n)
    throw std::out_of_range("expression " + std::to_string(k) + " outside [0, " + std::to_string(n) + ")");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  w(k) = level;
  return ExpressionCode(std::move(w));
}

bool ExpressionCode::is_one_hot() const {
  int ones = 0;
  for (Index i = 0; i < weights.size(); ++i) {
    if (weights(i) == 1.0)
      ++ones;
    else if (weights(i) != 0.0)
      return false;
  }
  return ones == 1;
}

int ExpressionCode::dominant() const {
  if (weights.size() == 0) throw DimensionError("empty expression code");
  Index k = 0;
  weights.maxCoeff(&k);
  return static_cast<int>(k);
}

VertexMatrix Normalization::apply(const VertexMatrix& v) const {
  return (v.rowwise() - centroid.transpose()) / scale;
}

VertexMatrix Normalization::invert(const VertexMatrix& v) const {
  return (v * scale).rowwise() + centroid.transpose();
}

Eigen::MatrixXd Normalization::apply_flat(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c)
    for (Index r = 0; r < x.rows(); ++r) out(r, c) = (x(r, c) - centroid(r % 3)) / scale;
  return out;
}

Eigen::MatrixXd Normalization::invert_flat(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c)
    for (Index r = 0; r < x.rows(); ++r) out(r, c) = x(r, c) * scale + centroid(r % 3);
  return out;
}

namespace {

template <typename T>
std::vector<T> select(std::size_t n, std::span<const std::size_t> indices, auto&& get) {
  std::vector<T> out;
  if (indices.empty()) {
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(get(i));
  } else {
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(get(i));
  }
  return out;
}

}  // namespace

Eigen::MatrixXd Dataset::stacked(std::span<const std::size_t> indices) const {
  const std::size_t n = indices.empty() ? samples.size() : indices.size();
  Eigen::MatrixXd x(3 * vertex_count(), static_cast<Index>(n));
  for (std::size_t c = 0; c < n; ++c) {
    const FaceSample& s = samples.at(indices.empty() ? c : indices[c]);
    x.col(static_cast<Index>(c)) = s.mesh.flatten();
  }
  return x;
}

std::vector<int> Dataset::identity_labels(std::span<const std::size_t> indices) const {
  return select<int>(samples.size(), indices, [&](std::size_t i) { return samples.at(i).identity; });
}

std::vector<int> Dataset::expression_labels(std::span<const std::size_t> indices) const {
  return select<int>(samples.size(), indices,
                     [&](std::size_t i) { return samples.at(i).expression.dominant(); });
}

// ---- manifest ----

json normalization_to_json(const Normalization& n) {
  return {{"centroid", {n.centroid.x(), n.centroid.y(), n.centroid.z()}}, {"scale", n.scale}};
}

Normalization normalization_from_json(const json& j) {
  Normalization n;
  const auto& c = j.at("centroid");
  if (!c.is_array() || c.size() != 3) throw DatasetError("normalization centroid must have 3 entries");
  n.centroid = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
  n.scale = j.at("scale").get<double>();
  if (!(n.scale > 0)) throw DatasetError("normalization scale must be positive");
  return n;
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DatasetError("malformed manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.version = j.value("version", 1);
    m.n_id = j.at("n_id").get<int>();
    m.n_exp = j.at("n_exp").get<int>();
    m.units = j.value("units", std::string("mm"));
    m.topology_id = j.value("topology_id", std::string());
    if (j.contains("expression_names")) m.expression_names = j["expression_names"].get<std::vector<std::string>>();
    if (j.contains("normalization")) m.normalization = normalization_from_json(j["normalization"]);
    m.base_dir = path.parent_path();
    for (const auto& s : j.at("samples")) {
      ManifestEntry e;
      e.path = s.at("path").get<std::string>();
      e.identity = s.at("id").get<int>();
      auto w = s.at("exp").get<std::vector<double>>();
      e.expression = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Index>(w.size()));
      m.samples.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DatasetError("invalid manifest " + path.string() + ": " + e.what());
  }
  if (m.n_id <= 0 || m.n_exp <= 0) throw DatasetError("manifest n_id and n_exp must be positive");
  return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  json j;
  j["version"] = m.version;
  j["n_id"] = m.n_id;
  j["n_exp"] = m.n_exp;
  j["units"] = m.units;
  if (!m.topology_id.empty()) j["topology_id"] = m.topology_id;
  if (!m.expression_names.empty()) j["expression_names"] = m.expression_names;
  if (m.normalization) j["normalization"] = normalization_to_json(*m.normalization);
  j["samples"] = json::array();
  for (const auto& e : m.samples) {
    j["samples"].push_back({{"path", e.path.generic_string()},
                            {"id", e.identity},
                            {"exp", std::vector<double>(e.expression.data(),
                                                        e.expression.data() + e.expression.size())}});
  }
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write manifest " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw DatasetError("failed writing manifest " + path.string());
}

Dataset load_dataset(const DatasetManifest& manifest) {
  Dataset d;
  d.n_id = manifest.n_id;
  d.n_exp = manifest.n_exp;
  d.units = manifest.units;
  d.expression_names = manifest.expression_names;
  d.normalization = manifest.normalization;
  for (const auto& e : manifest.samples) {
    const fs::path p = e.path.is_absolute() ? e.path : manifest.base_dir / e.path;
    if (!fs::exists(p)) throw DatasetError("missing mesh file " + p.string());
    if (e.identity < 0 || e.identity >= manifest.n_id)
      throw DatasetError("identity label " + std::to_string(e.identity) + " out of range in " + p.string());
    if (e.expression.size() != manifest.n_exp)
      throw DatasetError("expression code of " + p.string() + " has length " +
                         std::to_string(e.expression.size()) + ", expected " + std::to_string(manifest.n_exp));
    if (!e.expression.allFinite() || (e.expression.array() < 0).any())
      throw DatasetError("expression code of " + p.string() + " must be finite and nonnegative");
    Mesh mesh = import_mesh(p);
    if (!d.topology) {
      auto topo = std::make_shared<Topology>(*mesh.topology);
      topo->id = manifest.topology_id.empty() ? "manifest-" + std::to_string(mesh.vertex_count())
                                              : manifest.topology_id;
      d.topology = topo;
    } else {
      if (mesh.vertex_count() != d.topology->vertex_count)
        throw DatasetError("vertex-count mismatch: " + p.string() + " has " +
                           std::to_string(mesh.vertex_count()) + " vertices, dataset has " +
                           std::to_string(d.topology->vertex_count));
      if (mesh.topology->faces.rows() != d.topology->faces.rows() ||
          mesh.topology->faces != d.topology->faces)
        throw DatasetError("topology mismatch: faces of " + p.string() + " differ from the dataset's");
    }
    mesh.topology = d.topology;
    validate(mesh);
    d.samples.push_back({std::move(mesh), e.identity, ExpressionCode(e.expression)});
  }
  return d;
}

Dataset load_dataset(const fs::path& manifest_path) { return load_dataset(read_manifest(manifest_path)); }

void write_dataset(const Dataset& d, const fs::path& dir) {
  fs::create_directories(dir / "meshes");
  DatasetManifest m;
  m.n_id = d.n_id;
  m.n_exp = d.n_exp;
  m.units = d.units;
  m.topology_id = d.topology ? d.topology->id : std::string();
  m.expression_names = d.expression_names;
  m.normalization = d.normalization;
  char name[32];
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto& s = d.samples[i];
    std::snprintf(name, sizeof(name), "%06zu.obj", i);
    const fs::path rel = fs::path("meshes") / name;
    export_mesh(s.mesh, dir / rel, std::nullopt);
    m.samples.push_back({rel, s.identity, s.expression.weights});
  }
  write_manifest(m, dir / "manifest.json");
}

// ---- OBJ ----

namespace {

void append_number(std::string& out, double v, std::optional<int> digits) {
  char buf[64];
  std::to_chars_result r = digits ? std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, *digits)
                                  : std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, r.ptr);
}

}  // namespace

std::string mesh_to_obj(const Mesh& mesh, std::optional<int> significant_digits) {
  validate(mesh);
  std::string out;
  out.reserve(static_cast<std::size_t>(mesh.vertex_count()) * 48);
  for (Index v = 0; v < mesh.vertex_count(); ++v) {
    out += 'v';
    for (int k = 0; k < 3; ++k) {
      out += ' ';
      append_number(out, mesh.vertices(v, k), significant_digits);
    }
    out += '\n';
  }
  const auto& f = mesh.topology->faces;
  for (Index i = 0; i < f.rows(); ++i) {
    out += "f " + std::to_string(f(i, 0) + 1) + ' ' + std::to_string(f(i, 1) + 1) + ' ' +
           std::to_string(f(i, 2) + 1) + '\n';
  }
  return out;
}

void export_mesh(const Mesh& mesh, const fs::path& path, std::optional<int> significant_digits) {
  const std::string text = mesh_to_obj(mesh, significant_digits);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

namespace {

double parse_double(std::string_view token, std::size_t line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw DatasetError("bad number '" + std::string(token) + "' on line " + std::to_string(line));
  return v;
}

std::uint32_t parse_index(std::string_view token, std::size_t line) {
  // "i", "i/t", "i/t/n" and "i//n" all start with the vertex index
  token = token.substr(0, token.find('/'));
  long v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || v < 1)
    throw DatasetError("bad face index '" + std::string(token) + "' on line " + std::to_string(line));
  return static_cast<std::uint32_t>(v - 1);
}

}  // namespace

Mesh parse_obj(const std::string& text) {
  std::vector<double> coords;
  std::vector<std::uint32_t> faces;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<std::string_view> tok;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    tok.clear();
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) tok.push_back(line.substr(i, j - i));
      i = j;
    }
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) throw DatasetError("vertex line " + std::to_string(line_no) + " needs 3 coordinates");
      for (int k = 1; k <= 3; ++k) coords.push_back(parse_double(tok[static_cast<std::size_t>(k)], line_no));
    } else if (tok[0] == "f") {
      if (tok.size() != 4) throw DatasetError("face line " + std::to_string(line_no) + " is not a triangle");
      for (int k = 1; k <= 3; ++k) faces.push_back(parse_index(tok[static_cast<std::size_t>(k)], line_no));
    }
  }
  auto topo = std::make_shared<Topology>();
  topo->vertex_count = static_cast<Index>(coords.size() / 3);
  topo->faces = Eigen::Map<FaceMatrix>(faces.data(), static_cast<Index>(faces.size() / 3), 3);
  Mesh m;
  m.vertices = Eigen::Map<VertexMatrix>(coords.data(), static_cast<Index>(coords.size() / 3), 3);
  m.topology = std::move(topo);
  validate(m);
  return m;
}

Mesh import_mesh(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open mesh " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_obj(ss.str());
}

// ---- normalization ----

std::pair<Dataset, Normalization> normalize(const Dataset& dataset) {
  if (dataset.empty()) throw DatasetError("cannot normalize an empty dataset");
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Index count = 0;
  for (const auto& s : dataset.samples) {
    sum += s.mesh.vertices.colwise().sum().transpose();
    count += s.mesh.vertex_count();
  }
  Normalization rec;
  rec.centroid = sum / static_cast<double>(count);
  double sq = 0.0;
  for (const auto& s : dataset.samples)
    sq += (s.mesh.vertices.rowwise() - rec.centroid.transpose()).squaredNorm();
  rec.scale = std::sqrt(sq / static_cast<double>(count));
  if (!(rec.scale > 0) || !std::isfinite(rec.scale))
    throw DatasetError("degenerate dataset: all vertices coincide");
  Dataset out = dataset;
  for (auto& s : out.samples) s.mesh.vertices = rec.apply(s.mesh.vertices);
  if (dataset.normalization) {
    // compose with the existing record so denormalize still returns raw units
    Normalization composed;
    composed.scale = dataset.normalization->scale * rec.scale;
    composed.centroid = dataset.normalization->centroid + dataset.normalization->scale * rec.centroid;
    out.normalization = composed;
  } else {
    out.normalization = rec;
  }
  return {std::move(out), rec};
}

Dataset denormalize(const Dataset& dataset, const Normalization& record) {
  Dataset out = dataset;
  for (auto& s : out.samples) s.mesh.vertices = record.invert(s.mesh.vertices);
  out.normalization.reset();
  return out;
}

}  // namespace ffl
