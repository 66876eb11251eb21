#pragma once

// Binary checkpoint container shared by every model:
//
//   "FFL1" | u32 version | u32 n_id | u32 n_exp | u32 V | u64 header length
//   | JSON header | f64 tensor blobs
//
// All integers and floats are little-endian. The JSON header carries the
// model kind, its architecture and the ordered tensor table
// [{name, rows, cols}]; blobs follow in that order, each in column-major
// element order. Reading back a written checkpoint is bit-exact.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ffl/tensor.hpp"

namespace ffl {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'F', 'F', 'L', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorBlob {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::vector<double> data;
};

struct Checkpoint {
  std::string kind;
  nlohmann::json architecture;
  std::uint32_t n_id = 0;
  std::uint32_t n_exp = 0;
  std::uint32_t vertex_count = 0;
  std::vector<TensorBlob> tensors;

  void add_net(const std::string& prefix, const DenseNet<double>& net);
  void add_matrix(const std::string& name, const Eigen::MatrixXd& m);
  // Rebuilds a net of the given layout from the tensors stored under prefix.
  DenseNet<double> net(const std::string& prefix, const std::vector<LayerSpec>& specs) const;
  Eigen::MatrixXd matrix(const std::string& name) const;
  const TensorBlob& tensor(const std::string& name) const;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

nlohmann::json specs_to_json(const std::vector<LayerSpec>& specs);
std::vector<LayerSpec> specs_from_json(const nlohmann::json& j);

}  // namespace ffl
