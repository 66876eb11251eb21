#include "ffl/service.hpp"

#include <bit>
#include <cstring>
#include <set>

#include <httplib.h>

#include "ffl/synthesis.hpp"

namespace ffl {

using json = nlohmann::json;

namespace {

struct RequestError : std::runtime_error {
  std::string code;
  RequestError(std::string c, const std::string& message) : std::runtime_error(message), code(std::move(c)) {}
};

void allow_only(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw RequestError("invalid_type", where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw RequestError("unknown_field", "unknown field '" + key + "' in " + where);
  }
}

const json& required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw RequestError("missing_field", std::string("missing field '") + key + "' in " + where);
  return j.at(key);
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw RequestError("invalid_type", std::string("field '") + key + "' in " + where + " has the wrong type");
  }
}

template <typename T>
T optional_field(const json& body, const char* key, T fallback, const std::string& where) {
  return body.contains(key) ? get_as<T>(body.at(key), key, where) : fallback;
}

Eigen::VectorXd number_vector(const json& j, const char* key, const std::string& where) {
  if (!j.is_array()) throw RequestError("invalid_type", std::string("field '") + key + "' in " + where + " must be an array");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw RequestError("invalid_type", std::string("field '") + key + "' in " + where + " must hold numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

std::vector<double> to_vec(const Eigen::Ref<const Eigen::VectorXd>& v) { return {v.data(), v.data() + v.size()}; }

LatentCode parse_code(const ModelBundle& b, const json& j, const std::string& where) {
  allow_only(j, {"z_id", "z_exp", "z_noise"}, where);
  LatentCode c;
  c.z_id = number_vector(required(j, "z_id", where), "z_id", where);
  c.z_exp = ExpressionCode(number_vector(required(j, "z_exp", where), "z_exp", where));
  c.z_noise = number_vector(required(j, "z_noise", where), "z_noise", where);
  try {
    check_code(b.gan, c);
  } catch (const std::exception& e) {
    throw RequestError("dimension_mismatch", where + ": " + e.what());
  }
  return c;
}

LatentCode sample_request(const ModelBundle& b, const json& j) {
  const std::string where = "sample";
  allow_only(j, {"identity", "expression", "level", "seed"}, where);
  const auto seed = optional_field<std::uint64_t>(j, "seed", 0, where);
  const double level = optional_field<double>(j, "level", 1.0, where);
  if (!(level >= 0.0)) throw RequestError("invalid_value", "sample level must be nonnegative");
  Rng rng(seed);
  IdSpec id = IdSpec::fresh();
  if (j.contains("identity") && !j.at("identity").is_null()) {
    const auto& v = j.at("identity");
    if (v.is_string() && v.get<std::string>() == "fresh") {
      id = IdSpec::fresh();
    } else {
      const int k = get_as<int>(v, "identity", where);
      if (k < 0 || k >= b.gan.arch.n_id)
        throw RequestError("out_of_range", "identity " + std::to_string(k) + " outside [0, " +
                                               std::to_string(b.gan.arch.n_id) + ")");
      id = IdSpec::of_class(k);
    }
  } else if (b.gan.arch.id_mode == IdMode::one_hot) {
    id = IdSpec::of_class(static_cast<int>(rng.index(static_cast<std::uint64_t>(b.gan.arch.n_id))));
  }
  if (id.kind == IdSpec::Kind::fresh_gaussian && b.gan.arch.id_mode != IdMode::gaussian)
    throw RequestError("invalid_value", "fresh identities need a gaussian id_mode model");
  ExpressionCode exp = ExpressionCode::neutral(b.gan.arch.n_exp);
  if (j.contains("expression") && !j.at("expression").is_null()) {
    const int e = get_as<int>(j.at("expression"), "expression", where);
    if (e < 0 || e >= b.gan.arch.n_exp)
      throw RequestError("out_of_range", "expression " + std::to_string(e) + " outside [0, " +
                                             std::to_string(b.gan.arch.n_exp) + ")");
    exp = ExpressionCode::one_hot(b.gan.arch.n_exp, e, level);
  }
  return sample_code(b.gan, id, exp, rng);
}

json mesh_json(const Mesh& m) {
  const auto& f = m.topology->faces;
  return {{"vertices", std::vector<double>(m.vertices.data(), m.vertices.data() + m.vertices.size())},
          {"faces", std::vector<std::uint32_t>(f.data(), f.data() + f.size())}};
}

json embedding_json(const EmbeddingPair& e) { return {{"mu_id", to_vec(e.mu_id)}, {"mu_exp", to_vec(e.mu_exp)}}; }

struct Output {
  json body;
  std::vector<Mesh> meshes;
};

GenerateOptions options_from(const ModelBundle& b, const json& body, const std::string& where) {
  GenerateOptions o;
  if (optional_field<bool>(body, "denormalize", true, where)) o.denormalize = b.card.normalization;
  return o;
}

Output handle_generate(const ModelBundle& b, const json& body) {
  const std::string where = "generate request";
  allow_only(body, {"code", "sample", "denormalize", "return_embedding", "return_mesh"}, where);
  if (body.contains("code") == body.contains("sample"))
    throw RequestError("invalid_request", "generate needs exactly one of 'code' and 'sample'");
  const LatentCode code =
      body.contains("code") ? parse_code(b, body.at("code"), "code") : sample_request(b, body.at("sample"));
  const Generated g = generate(b.sae, b.gan, code, b.card.topology, options_from(b, body, where));
  Output out;
  out.body["code"] = code_to_json(code);
  if (optional_field<bool>(body, "return_embedding", false, where)) out.body["embedding"] = embedding_json(g.embedding);
  if (optional_field<bool>(body, "return_mesh", true, where)) out.body["mesh"] = mesh_json(g.mesh);
  out.meshes.push_back(g.mesh);
  return out;
}

Output handle_interpolate(const ModelBundle& b, const json& body) {
  const std::string where = "interpolate request";
  allow_only(body, {"a", "b", "steps", "targets", "space", "denormalize", "return_embedding"}, where);
  InterpolationPath p;
  p.a = parse_code(b, required(body, "a", where), "a");
  p.b = parse_code(b, required(body, "b", where), "b");
  p.steps = get_as<int>(required(body, "steps", where), "steps", where);
  if (p.steps < 2 || p.steps > 4096) throw RequestError("invalid_value", "steps must be in [2, 4096]");
  if (body.contains("targets")) {
    p.targets = 0;
    const auto names = get_as<std::vector<std::string>>(body.at("targets"), "targets", where);
    for (const auto& n : names) {
      if (n == "z_id") p.targets |= target_z_id;
      else if (n == "z_exp") p.targets |= target_z_exp;
      else if (n == "z_noise") p.targets |= target_z_noise;
      else throw RequestError("invalid_value", "unknown interpolation target '" + n + "'");
    }
    if (p.targets == 0) throw RequestError("invalid_value", "targets must not be empty");
  }
  const auto space = optional_field<std::string>(body, "space", "code", where);
  if (space == "code") p.space = InterpolationSpace::code;
  else if (space == "embedding") p.space = InterpolationSpace::embedding;
  else throw RequestError("invalid_value", "space must be 'code' or 'embedding'");
  const bool with_embedding = optional_field<bool>(body, "return_embedding", false, where);

  const auto frames = interpolate(b.sae, b.gan, p, b.card.topology, options_from(b, body, where));
  const auto codes = p.space == InterpolationSpace::code ? interpolate_codes(p) : std::vector<LatentCode>{};
  Output out;
  out.body["frames"] = json::array();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    json f{{"t", static_cast<double>(i) / static_cast<double>(frames.size() - 1)}, {"mesh", mesh_json(frames[i].mesh)}};
    if (!codes.empty()) f["code"] = code_to_json(codes[i]);
    if (with_embedding) f["embedding"] = embedding_json(frames[i].embedding);
    out.body["frames"].push_back(std::move(f));
    out.meshes.push_back(frames[i].mesh);
  }
  return out;
}

Output handle_intensity(const ModelBundle& b, const json& body) {
  const std::string where = "intensity request";
  allow_only(body, {"code", "expression", "levels", "denormalize"}, where);
  const LatentCode code = parse_code(b, required(body, "code", where), "code");
  const int e = get_as<int>(required(body, "expression", where), "expression", where);
  const auto levels = get_as<std::vector<double>>(required(body, "levels", where), "levels", where);
  if (levels.empty() || levels.size() > 4096) throw RequestError("invalid_value", "levels must hold 1 to 4096 values");
  const auto opts = options_from(b, body, where);
  Output out;
  out.body["frames"] = json::array();
  for (double level : levels) {
    const LatentCode c = set_intensity(code, e, level);
    const Generated g = generate(b.sae, b.gan, c, b.card.topology, opts);
    out.body["frames"].push_back({{"level", level}, {"code", code_to_json(c)}, {"mesh", mesh_json(g.mesh)}});
    out.meshes.push_back(g.mesh);
  }
  return out;
}

Output handle_mix(const ModelBundle& b, const json& body) {
  const std::string where = "mix request";
  allow_only(body, {"code", "weights", "denormalize"}, where);
  const LatentCode code = parse_code(b, required(body, "code", where), "code");
  const ExpressionCode w(number_vector(required(body, "weights", where), "weights", where));
  const LatentCode c = mix_expressions(code, w);
  const Generated g = generate(b.sae, b.gan, c, b.card.topology, options_from(b, body, where));
  Output out;
  out.body["code"] = code_to_json(c);
  out.body["mesh"] = mesh_json(g.mesh);
  out.meshes.push_back(g.mesh);
  return out;
}

Output handle_style_edit(const ModelBundle& b, const json& body) {
  const std::string where = "style-edit request";
  allow_only(body, {"code", "donor_z_id", "denormalize", "return_embedding"}, where);
  const LatentCode code = parse_code(b, required(body, "code", where), "code");
  const Eigen::VectorXd donor = number_vector(required(body, "donor_z_id", where), "donor_z_id", where);
  const Generated g = generate(b.sae, b.gan, style_edit(code, donor), b.card.topology, options_from(b, body, where));
  Output out;
  out.body["code"] = code_to_json(code);
  out.body["donor_z_id"] = to_vec(donor);
  if (optional_field<bool>(body, "return_embedding", false, where)) out.body["embedding"] = embedding_json(g.embedding);
  out.body["mesh"] = mesh_json(g.mesh);
  out.meshes.push_back(g.mesh);
  return out;
}

json model_json(const ModelBundle& b) {
  const auto& a = b.gan.arch;
  return {{"n_id", a.n_id},
          {"n_exp", a.n_exp},
          {"V", b.sae.arch.vertex_count},
          {"z_dims", {{"z_id", a.z_id_dim()}, {"z_exp", a.z_exp_dim()}, {"z_noise", a.z_noise_dim}}},
          {"embedding_dims", {{"mu_id", a.id_dim}, {"mu_exp", a.exp_dim}}},
          {"id_mode", to_string(a.id_mode)},
          {"expression_names", b.card.expression_names},
          {"units", b.card.normalization ? b.card.units : "normalized"}};
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  std::string_view bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (bytes.size() - pos < n) throw std::runtime_error("truncated mesh frame payload");
  }
  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += static_cast<std::size_t>(width);
    return v;
  }
};

}  // namespace

std::string encode_mesh_frames(std::span<const Mesh> meshes, const std::string& hash) {
  std::string s = "FFLM";
  put_u32(s, 1);
  put_u32(s, static_cast<std::uint32_t>(meshes.size()));
  put_u32(s, static_cast<std::uint32_t>(hash.size()));
  s += hash;
  for (const auto& m : meshes) {
    const auto& f = m.topology->faces;
    put_u32(s, static_cast<std::uint32_t>(m.vertex_count()));
    put_u32(s, static_cast<std::uint32_t>(f.rows()));
    for (Index i = 0; i < m.vertices.size(); ++i) put_u64(s, std::bit_cast<std::uint64_t>(m.vertices.data()[i]));
    for (Index i = 0; i < f.size(); ++i) put_u32(s, f.data()[i]);
  }
  return s;
}

DecodedFrames decode_mesh_frames(std::string_view bytes) {
  if (bytes.substr(0, 4) != "FFLM") throw std::runtime_error("not a mesh frame payload");
  Reader r{bytes, 4};
  if (r.uint(4) != 1) throw std::runtime_error("unsupported mesh frame version");
  const auto frames = r.uint(4);
  const auto hash_len = r.uint(4);
  r.need(hash_len);
  DecodedFrames d;
  d.hash = std::string(bytes.substr(r.pos, hash_len));
  r.pos += hash_len;
  for (std::uint64_t k = 0; k < frames; ++k) {
    const auto v = r.uint(4);
    const auto f = r.uint(4);
    Eigen::VectorXd x(static_cast<Index>(3 * v));
    for (Index i = 0; i < x.size(); ++i) x(i) = std::bit_cast<double>(r.uint(8));
    std::vector<std::uint32_t> faces(3 * f);
    for (auto& idx : faces) idx = static_cast<std::uint32_t>(r.uint(4));
    d.vertices.push_back(std::move(x));
    d.faces.push_back(std::move(faces));
  }
  if (r.pos != bytes.size()) throw std::runtime_error("trailing bytes after mesh frames");
  return d;
}

Service::Service(std::shared_ptr<const ModelBundle> bundle) : bundle_(std::move(bundle)) {
  if (!bundle_) throw std::invalid_argument("Service needs a bundle");
}

HttpResponse Service::handle(const HttpRequest& req) const {
  const ModelBundle& b = *bundle_;
  HttpResponse res;
  res.headers["X-Bundle-Hash"] = b.hash;
  auto fail = [&](int status, const std::string& code, const std::string& message) {
    res.status = status;
    res.content_type = "application/json";
    res.body = json{{"error", {{"code", code}, {"message", message}}}, {"bundle_hash", b.hash}}.dump();
    return res;
  };

  static const std::set<std::string> gets{"/api/v1/health", "/api/v1/model"};
  static const std::set<std::string> posts{"/api/v1/generate", "/api/v1/interpolate", "/api/v1/intensity",
                                           "/api/v1/mix", "/api/v1/style-edit"};
  const bool is_get = gets.contains(req.path);
  const bool is_post = posts.contains(req.path);
  if (!is_get && !is_post) return fail(404, "not_found", "no endpoint " + req.path);
  if ((is_get && req.method != "GET") || (is_post && req.method != "POST"))
    return fail(405, "method_not_allowed", req.method + " is not allowed on " + req.path);

  if (req.path == "/api/v1/health") {
    res.body = json{{"status", "ok"}, {"bundle_hash", b.hash}}.dump();
    return res;
  }
  if (req.path == "/api/v1/model") {
    json j = model_json(b);
    j["bundle_hash"] = b.hash;
    res.body = j.dump();
    return res;
  }

  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::exception& e) {
    return fail(400, "malformed_json", e.what());
  }
  try {
    Output out;
    if (req.path == "/api/v1/generate") out = handle_generate(b, body);
    else if (req.path == "/api/v1/interpolate") out = handle_interpolate(b, body);
    else if (req.path == "/api/v1/intensity") out = handle_intensity(b, body);
    else if (req.path == "/api/v1/mix") out = handle_mix(b, body);
    else out = handle_style_edit(b, body);

    if (req.accept.find("application/octet-stream") != std::string::npos) {
      res.content_type = "application/octet-stream";
      res.body = encode_mesh_frames(out.meshes, b.hash);
    } else {
      out.body["bundle_hash"] = b.hash;
      res.body = out.body.dump();
    }
    return res;
  } catch (const RequestError& e) {
    return fail(400, e.code, e.what());
  } catch (const DimensionError& e) {
    return fail(400, "dimension_mismatch", e.what());
  } catch (const std::out_of_range& e) {
    return fail(400, "out_of_range", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(400, "invalid_value", e.what());
  } catch (const NonFiniteError& e) {
    return fail(400, "non_finite", e.what());
  }
}

struct Server::Impl {
  Service service;
  httplib::Server http;
  std::thread thread;

  explicit Impl(std::shared_ptr<const ModelBundle> b) : service(std::move(b)) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      HttpRequest r{req.method, req.path, req.body, req.get_header_value("Accept")};
      HttpResponse out;
      try {
        out = service.handle(r);
      } catch (const std::exception& e) {
        out.status = 500;
        out.body = json{{"error", {{"code", "internal"}, {"message", e.what()}}},
                        {"bundle_hash", service.bundle().hash}}.dump();
        out.headers["X-Bundle-Hash"] = service.bundle().hash;
      }
      res.status = out.status;
      for (const auto& [k, v] : out.headers) res.set_header(k, v);
      res.set_content(out.body, out.content_type);
    };
    http.Get(R"(/.*)", route);
    http.Post(R"(/.*)", route);
    http.Put(R"(/.*)", route);
    http.Delete(R"(/.*)", route);
  }
};

Server::Server(std::shared_ptr<const ModelBundle> bundle) : impl_(std::make_unique<Impl>(std::move(bundle))) {}

Server::~Server() { stop(); }

int Server::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->http.bind_to_any_port(host);
  } else if (!impl_->http.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return bound;
}

void Server::run(const std::string& host, int port) {
  if (!impl_->http.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  impl_->http.listen_after_bind();
}

void Server::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
  if (impl_ && impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace ffl
