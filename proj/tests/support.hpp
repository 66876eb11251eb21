#pragma once

// Small fixtures and brute-force references shared by the tests.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "ffl/gan.hpp"
#include "ffl/mesh.hpp"
#include "ffl/sae.hpp"
#include "ffl/synthetic.hpp"

namespace ffl::test {

inline SyntheticSpec tiny_spec(std::uint64_t seed = 3) {
  SyntheticSpec s;
  s.vertex_count = 20;
  s.n_id = 3;
  s.n_exp = 2;
  s.samples_per_cell = 4;
  s.identity_rank = 3;
  s.seed = seed;
  return s;
}

// Normalized tiny synthetic dataset.
inline Dataset tiny_dataset(std::uint64_t seed = 3) {
  return normalize(generate_synthetic(tiny_spec(seed)).dataset).first;
}

inline SAEArchitecture tiny_sae_arch(const Dataset& d) {
  SAEArchitecture a;
  a.vertex_count = d.vertex_count();
  a.n_id = d.n_id;
  a.n_exp = d.n_exp;
  a.id_dim = 6;
  a.exp_dim = 4;
  a.encoder_hidden = {16, 12};
  a.decoder_hidden = {12, 16};
  return a;
}

inline SAEModel tiny_sae(const Dataset& d, std::uint64_t seed = 5) {
  SAEModel m = make_sae(tiny_sae_arch(d));
  Rng rng(seed);
  initialize(m, rng);
  return m;
}

inline GANArchitecture tiny_gan_arch(const SAEModel& sae, IdMode mode) {
  GANArchitecture a;
  a.vertex_count = sae.arch.vertex_count;
  a.n_id = sae.arch.n_id;
  a.n_exp = sae.arch.n_exp;
  a.id_dim = sae.arch.id_dim;
  a.exp_dim = sae.arch.exp_dim;
  a.id_mode = mode;
  a.gaussian_z_id_dim = 4;
  a.z_noise_dim = 3;
  a.generator_hidden = {10, 8};
  a.discriminator_hidden = {12, 8};
  return a;
}

inline ShapeGAN tiny_gan(const SAEModel& sae, IdMode mode, std::uint64_t seed = 9) {
  ShapeGAN g = make_gan(tiny_gan_arch(sae, mode));
  Rng rng(seed);
  initialize(g, rng);
  return g;
}

inline GANTrainConfig tiny_gan_config(IdMode mode, int steps = 20) {
  GANTrainConfig c;
  c.steps = steps;
  c.batch_size = 8;
  c.log_every = 5;
  c.id_mode = mode;
  c.gaussian_z_id_dim = 4;
  c.z_noise_dim = 3;
  c.generator_hidden = {10, 8};
  c.discriminator_hidden = {12, 8};
  return c;
}

// Scalar-loop forward pass, independent of the Eigen expression code.
inline Eigen::VectorXd naive_forward(const DenseNet<double>& net, const Eigen::VectorXd& x) {
  std::vector<double> h(x.data(), x.data() + x.size());
  for (const auto& layer : net.layers) {
    std::vector<double> z(static_cast<std::size_t>(layer.out_dim()), 0.0);
    for (Index r = 0; r < layer.out_dim(); ++r) {
      double acc = layer.has_bias() ? layer.bias(r) : 0.0;
      for (Index c = 0; c < layer.in_dim(); ++c) acc += layer.weight(r, c) * h[static_cast<std::size_t>(c)];
      if (layer.activation == Activation::leaky_relu && acc <= 0) acc *= 0.2;
      z[static_cast<std::size_t>(r)] = acc;
    }
    h = std::move(z);
  }
  return Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<Index>(h.size()));
}

inline double naive_vertex_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Index v = a.size() / 3;
  double total = 0.0;
  for (Index i = 0; i < v; ++i) {
    double sq = 0.0;
    for (Index k = 0; k < 3; ++k) {
      const double d = a(3 * i + k) - b(3 * i + k);
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(v);
}

inline double rel_err(double a, double b) {
  const double denom = std::max(std::abs(a), std::abs(b));
  return denom == 0 ? 0.0 : std::abs(a - b) / denom;
}

// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
inline Eigen::VectorXd jacobi_eigenvalues(Eigen::MatrixXd a) {
  const Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Eigen::VectorXd ev = a.diagonal();
  std::sort(ev.data(), ev.data() + n, std::greater<>());
  return ev;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ffl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace ffl::test
