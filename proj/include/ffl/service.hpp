#pragma once

// HTTP surface over an immutable model bundle. Service::handle is a pure
// request -> response function; Server runs it behind cpp-httplib.
//
// Endpoints (all under /api/v1):
//   GET  /health, /model
//   POST /generate, /interpolate, /intensity, /mix, /style-edit
// Unknown request fields are rejected with 400. Every response carries the
// bundle hash, in the X-Bundle-Hash header and, for JSON, a bundle_hash field.
// With "Accept: application/octet-stream" mesh responses use the binary
// framing below.

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "ffl/bundle.hpp"

namespace ffl {

struct HttpRequest {
  std::string method;
  std::string path;
  std::string body;
  std::string accept;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

class Service {
 public:
  explicit Service(std::shared_ptr<const ModelBundle> bundle);

  HttpResponse handle(const HttpRequest& request) const;
  const ModelBundle& bundle() const { return *bundle_; }

 private:
  std::shared_ptr<const ModelBundle> bundle_;
};

// Binary mesh framing, little-endian:
//   "FFLM" u32 version=1 u32 frame_count u32 hash_len hash bytes
//   per frame: u32 V u32 F f64[3V] u32[3F]
std::string encode_mesh_frames(std::span<const Mesh> meshes, const std::string& hash);

struct DecodedFrames {
  std::string hash;
  std::vector<Eigen::VectorXd> vertices;  // flattened, 3V
  std::vector<std::vector<std::uint32_t>> faces;
};
DecodedFrames decode_mesh_frames(std::string_view bytes);

class Server {
 public:
  explicit Server(std::shared_ptr<const ModelBundle> bundle);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port. Throws on bind failure.
  int start(const std::string& host, int port);
  // Blocks serving on the calling thread.
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ffl
