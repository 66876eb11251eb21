#pragma once

// A model bundle is a directory holding sae.ffl, gan.ffl and card.json
// (dataset dimensions, expression names, normalization and faces).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ffl/gan.hpp"
#include "ffl/mesh.hpp"
#include "ffl/sae.hpp"

namespace ffl {

class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetCard {
  int n_id = 0;
  int n_exp = 0;
  Index vertex_count = 0;
  std::string units = "mm";
  std::vector<std::string> expression_names;
  std::optional<Normalization> normalization;
  TopologyPtr topology;

  static DatasetCard of(const Dataset& dataset);
  nlohmann::json to_json() const;
  static DatasetCard from_json(const nlohmann::json& j);
};

struct ModelBundle {
  SAEModel sae;
  ShapeGAN gan;
  DatasetCard card;
  std::string hash;  // hex SHA-256 over the three files, in the order sae, gan, card
};

// Throws BundleError naming both offending dims when the parts disagree.
void check_bundle(const SAEModel& sae, const ShapeGAN& gan, const DatasetCard& card);

void save_bundle(const std::filesystem::path& dir, const SAEModel& sae, const ShapeGAN& gan, const DatasetCard& card);
ModelBundle load_bundle(const std::filesystem::path& dir);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace ffl
