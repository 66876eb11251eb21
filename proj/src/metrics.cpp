#include "ffl/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <Eigen/Eigenvalues>

#include "ffl/synthesis.hpp"

namespace ffl {

double mean_vertex_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size() || a.size() % 3 != 0 || a.size() == 0)
    throw DimensionError("mean_vertex_distance: flattened sizes " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  const Index v = a.size() / 3;
  double sum = 0.0;
  for (Index i = 0; i < v; ++i) {
    const double dx = a(3 * i) - b(3 * i);
    const double dy = a(3 * i + 1) - b(3 * i + 1);
    const double dz = a(3 * i + 2) - b(3 * i + 2);
    sum += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return sum / static_cast<double>(v);
}

double mean_vertex_distance(const Mesh& a, const Mesh& b) {
  if (a.vertex_count() != b.vertex_count())
    throw DimensionError("mean_vertex_distance: meshes have " + std::to_string(a.vertex_count()) + " and " +
                         std::to_string(b.vertex_count()) + " vertices");
  if (a.topology && b.topology && a.topology != b.topology &&
      (a.topology->id != b.topology->id || a.topology->faces != b.topology->faces))
    throw DimensionError("mean_vertex_distance: meshes have different topologies");
  return mean_vertex_distance(a.flatten(), b.flatten());
}

Eigen::MatrixXd stack_meshes(std::span<const Mesh> meshes) {
  if (meshes.empty()) return {};
  Eigen::MatrixXd m(3 * meshes.front().vertex_count(), static_cast<Index>(meshes.size()));
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    if (meshes[i].vertex_count() != meshes.front().vertex_count())
      throw DimensionError("stack_meshes: vertex counts differ");
    m.col(static_cast<Index>(i)) = meshes[i].flatten();
  }
  return m;
}

double raw_diversity(const Eigen::MatrixXd& set, std::size_t n_pairs, Rng& rng) {
  if (set.cols() < 2) throw std::invalid_argument("diversity needs at least 2 samples");
  if (n_pairs == 0) throw std::invalid_argument("diversity needs at least one pair");
  const auto n = static_cast<std::uint64_t>(set.cols());
  double sum = 0.0;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const auto i = rng.index(n);
    auto j = rng.index(n - 1);
    if (j >= i) ++j;
    sum += mean_vertex_distance(set.col(static_cast<Index>(i)), set.col(static_cast<Index>(j)));
  }
  return sum / static_cast<double>(n_pairs);
}

double raw_diversity_exhaustive(const Eigen::MatrixXd& set) {
  if (set.cols() < 2) throw std::invalid_argument("diversity needs at least 2 samples");
  double sum = 0.0;
  std::size_t count = 0;
  for (Index i = 0; i < set.cols(); ++i)
    for (Index j = i + 1; j < set.cols(); ++j) {
      sum += mean_vertex_distance(set.col(i), set.col(j));
      ++count;
    }
  return sum / static_cast<double>(count);
}

namespace {

void check_training_diversity(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("training diversity must be positive");
}

}  // namespace

double diversity(const Eigen::MatrixXd& set, std::size_t n_pairs, double training_diversity, Rng& rng) {
  check_training_diversity(training_diversity);
  return raw_diversity(set, n_pairs, rng) / training_diversity;
}

double diversity_exhaustive(const Eigen::MatrixXd& set, double training_diversity) {
  check_training_diversity(training_diversity);
  return raw_diversity_exhaustive(set) / training_diversity;
}

double controlled_training_diversity(const Dataset& training, ControlMode mode, std::size_t n_pairs, Rng& rng) {
  if (n_pairs == 0) throw std::invalid_argument("controlled diversity needs at least one pair");
  const auto ids = training.identity_labels();
  const auto exps = training.expression_labels();
  // shared factor -> sample indices
  std::map<int, std::vector<std::size_t>> groups;
  const bool fix_exp = mode == ControlMode::vary_id_fix_exp;
  for (std::size_t i = 0; i < training.size(); ++i) groups[fix_exp ? exps[i] : ids[i]].push_back(i);
  // groups in which at least two samples differ in the varied factor
  std::vector<const std::vector<std::size_t>*> usable;
  for (const auto& [key, members] : groups) {
    const auto varied = [&](std::size_t i) { return fix_exp ? ids[i] : exps[i]; };
    const bool mixed = std::any_of(members.begin(), members.end(),
                                   [&](std::size_t i) { return varied(i) != varied(members.front()); });
    if (mixed) usable.push_back(&members);
  }
  if (usable.empty()) throw std::invalid_argument("training data has no pairs for this controlled diversity mode");

  double sum = 0.0;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const auto& g = *usable[rng.index(usable.size())];
    std::size_t i = 0, j = 0;
    do {
      i = g[rng.index(g.size())];
      j = g[rng.index(g.size())];
    } while (fix_exp ? ids[i] == ids[j] : exps[i] == exps[j]);
    sum += mean_vertex_distance(training.samples[i].mesh.flatten(), training.samples[j].mesh.flatten());
  }
  return sum / static_cast<double>(n_pairs);
}

ControlledDiversity diversity_controlled(const ShapeGAN& gan, const SAEModel& sae, const Dataset& training,
                                         const ControlledConfig& config) {
  check_compatible(sae, gan);
  if (config.n_pairs == 0) throw std::invalid_argument("controlled diversity needs at least one pair");
  const auto& a = gan.arch;
  const bool fix_exp = config.mode == ControlMode::vary_id_fix_exp;
  if ((fix_exp && a.n_id < 2) || (!fix_exp && a.n_exp < 2))
    throw std::invalid_argument("controlled diversity needs two classes of the varied factor");

  Rng rng(config.seed);
  Rng train_rng = rng.split();
  Rng code_rng = rng.split();

  ControlledDiversity out;
  out.training = controlled_training_diversity(training, config.mode, config.n_pairs, train_rng);

  auto distinct = [&](int n) {
    const auto i = static_cast<int>(code_rng.index(static_cast<std::uint64_t>(n)));
    auto j = static_cast<int>(code_rng.index(static_cast<std::uint64_t>(n - 1)));
    if (j >= i) ++j;
    return std::pair{i, j};
  };

  std::vector<LatentCode> codes;
  codes.reserve(2 * config.n_pairs);
  for (std::size_t p = 0; p < config.n_pairs; ++p) {
    LatentCode ca, cb;
    if (fix_exp) {
      const auto [ia, ib] = distinct(a.n_id);
      const auto e = static_cast<Index>(code_rng.index(static_cast<std::uint64_t>(a.n_exp)));
      ca.z_id = identity_code(gan, IdSpec::of_class(ia), code_rng);
      cb.z_id = identity_code(gan, IdSpec::of_class(ib), code_rng);
      ca.z_exp = cb.z_exp = ExpressionCode::one_hot(a.n_exp, e, config.level);
    } else {
      const auto [ea, eb] = distinct(a.n_exp);
      const auto id = static_cast<int>(code_rng.index(static_cast<std::uint64_t>(a.n_id)));
      ca.z_id = cb.z_id = identity_code(gan, IdSpec::of_class(id), code_rng);
      ca.z_exp = ExpressionCode::one_hot(a.n_exp, ea, config.level);
      cb.z_exp = ExpressionCode::one_hot(a.n_exp, eb, config.level);
    }
    ca.z_noise.resize(a.z_noise_dim);
    for (Index r = 0; r < a.z_noise_dim; ++r) ca.z_noise(r) = code_rng.normal();
    cb.z_noise = ca.z_noise;
    codes.push_back(std::move(ca));
    codes.push_back(std::move(cb));
  }

  double sum = 0.0;
  constexpr std::size_t chunk = 1024;  // codes, even
  for (std::size_t start = 0; start < codes.size(); start += chunk) {
    const std::size_t len = std::min(chunk, codes.size() - start);
    const Eigen::MatrixXd x = decode(sae, generate_embeddings(gan, std::span(codes).subspan(start, len)));
    for (Index c = 0; c + 1 < static_cast<Index>(len); c += 2) sum += mean_vertex_distance(x.col(c), x.col(c + 1));
  }
  out.generated = sum / static_cast<double>(config.n_pairs);
  out.value = out.generated / out.training;
  if (config.keep_pairs)
    for (std::size_t p = 0; p < config.n_pairs; ++p) out.pairs.push_back({codes[2 * p], codes[2 * p + 1]});
  return out;
}

double specificity(const Eigen::MatrixXd& generated, const Eigen::MatrixXd& training, std::size_t n,
                   SpecificityMode mode) {
  if (training.cols() == 0) throw std::invalid_argument("specificity needs a nonempty training set");
  if (generated.cols() == 0) throw std::invalid_argument("specificity needs a nonempty generated set");
  if (generated.rows() != training.rows())
    throw DimensionError("specificity: generated and training meshes have different vertex counts");
  const Index count =
      (n == 0 || n > static_cast<std::size_t>(generated.cols())) ? generated.cols() : static_cast<Index>(n);
  double total = 0.0;
  for (Index g = 0; g < count; ++g) {
    if (mode == SpecificityMode::nearest) {
      double best = std::numeric_limits<double>::infinity();
      for (Index t = 0; t < training.cols(); ++t)
        best = std::min(best, mean_vertex_distance(generated.col(g), training.col(t)));
      total += best;
    } else {
      double s = 0.0;
      for (Index t = 0; t < training.cols(); ++t) s += mean_vertex_distance(generated.col(g), training.col(t));
      total += s / static_cast<double>(training.cols());
    }
  }
  return total / static_cast<double>(count);
}

ClusterStats cluster_stats(const Eigen::MatrixXd& x, std::span<const int> labels, std::uint64_t seed) {
  const Index n = x.cols();
  if (static_cast<Index>(labels.size()) != n)
    throw DimensionError("cluster_stats: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                         " embeddings");
  std::map<int, std::vector<Index>> members;
  for (Index i = 0; i < n; ++i) members[labels[static_cast<std::size_t>(i)]].push_back(i);
  if (members.size() < 2) throw std::invalid_argument("cluster_stats needs at least two labels");
  for (const auto& [label, m] : members)
    if (m.size() < 2)
      throw std::invalid_argument("cluster_stats: label " + std::to_string(label) + " has a single sample");

  ClusterStats s;
  const auto k = static_cast<Index>(members.size());
  Eigen::MatrixXd centroids(x.rows(), k);
  std::map<int, Index> slot;
  {
    Index c = 0;
    for (const auto& [label, m] : members) {
      s.labels.push_back(label);
      slot[label] = c;
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
      for (Index i : m) sum += x.col(i);
      centroids.col(c) = sum / static_cast<double>(m.size());
      double intra = 0.0;
      for (Index i : m) intra += (x.col(i) - centroids.col(c)).norm();
      s.intra.push_back(intra / static_cast<double>(m.size()));
      ++c;
    }
  }
  s.centroid_distances.resize(k, k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) s.centroid_distances(a, b) = (centroids.col(a) - centroids.col(b)).norm();
  for (Index a = 0; a < k; ++a) {
    double best = std::numeric_limits<double>::infinity();
    for (Index b = 0; b < k; ++b)
      if (b != a) best = std::min(best, s.centroid_distances(a, b));
    s.nearest_other.push_back(best);
  }
  for (Index a = 0; a < k; ++a) {
    s.mean_intra += s.intra[static_cast<std::size_t>(a)];
    s.mean_nearest_other += s.nearest_other[static_cast<std::size_t>(a)];
  }
  s.mean_intra /= static_cast<double>(k);
  s.mean_nearest_other /= static_cast<double>(k);
  s.separability = s.mean_intra > 0.0 ? std::min(kSeparabilityCap, s.mean_nearest_other / s.mean_intra)
                                      : kSeparabilityCap;

  std::size_t nc_ok = 0;
  for (Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    (centroids.colwise() - x.col(i)).colwise().squaredNorm().minCoeff(&best);
    nc_ok += s.labels[static_cast<std::size_t>(best)] == labels[static_cast<std::size_t>(i)];
  }
  s.nearest_centroid_accuracy = static_cast<double>(nc_ok) / static_cast<double>(n);

  // one-vs-rest ridge regression on standardized features, stratified half split
  Rng rng(seed);
  std::vector<Index> train, test;
  for (auto& [label, m] : members) {
    std::vector<Index> order = m;
    rng.shuffle(order.begin(), order.end());
    const std::size_t half = order.size() / 2;
    train.insert(train.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
    test.insert(test.end(), order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
  }
  const Index d = x.rows();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d), sd = Eigen::VectorXd::Zero(d);
  for (Index i : train) mean += x.col(i);
  mean /= static_cast<double>(train.size());
  for (Index i : train) sd += (x.col(i) - mean).cwiseAbs2();
  sd = (sd / static_cast<double>(train.size())).cwiseSqrt();
  for (Index r = 0; r < d; ++r)
    if (!(sd(r) > 0.0)) sd(r) = 1.0;
  auto features = [&](const std::vector<Index>& idx) {
    Eigen::MatrixXd f(static_cast<Index>(idx.size()), d + 1);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      f.row(static_cast<Index>(r)).head(d) = ((x.col(idx[r]) - mean).array() / sd.array()).matrix().transpose();
      f(static_cast<Index>(r), d) = 1.0;
    }
    return f;
  };
  const Eigen::MatrixXd ftrain = features(train);
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(ftrain.rows(), k, -1.0);
  for (std::size_t r = 0; r < train.size(); ++r)
    y(static_cast<Index>(r), slot[labels[static_cast<std::size_t>(train[r])]]) = 1.0;
  Eigen::MatrixXd gram = ftrain.transpose() * ftrain;
  gram.diagonal().head(d).array() += 1e-3 * static_cast<double>(train.size());
  const Eigen::MatrixXd w = gram.ldlt().solve(ftrain.transpose() * y);
  const Eigen::MatrixXd scores = features(test) * w;
  std::size_t ok = 0;
  for (std::size_t r = 0; r < test.size(); ++r) {
    Eigen::Index best = 0;
    scores.row(static_cast<Index>(r)).maxCoeff(&best);
    ok += s.labels[static_cast<std::size_t>(best)] == labels[static_cast<std::size_t>(test[r])];
  }
  s.probe_accuracy = static_cast<double>(ok) / static_cast<double>(test.size());
  return s;
}

PCAProjection pca_project_2d(const Eigen::MatrixXd& x) {
  if (x.cols() < 2) throw std::invalid_argument("pca_project_2d needs at least 2 samples");
  if (x.rows() < 1) throw std::invalid_argument("pca_project_2d needs at least one feature");
  PCAProjection p;
  p.mean = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - p.mean;
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(x.cols() - 1);
  p.total_variance = cov.trace();
  if (!(p.total_variance > 0.0)) throw std::invalid_argument("pca_project_2d: data has rank 0");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("pca_project_2d: eigensolver failed");
  const Index d = cov.rows();
  p.eigenvalues = eig.eigenvalues().reverse();
  p.components = Eigen::MatrixXd::Zero(d, 2);
  for (Index c = 0; c < std::min<Index>(2, d); ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - c);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0.0) v = -v;
    p.components.col(c) = v;
  }
  p.coordinates = p.components.transpose() * centered;
  return p;
}

void write_pca_csv(const PCAProjection& pca, std::span<const int> labels, const std::filesystem::path& path) {
  if (static_cast<Index>(labels.size()) != pca.coordinates.cols())
    throw DimensionError("write_pca_csv: label count differs from sample count");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "sample_id,label,x,y\n";
  for (Index i = 0; i < pca.coordinates.cols(); ++i)
    out << i << ',' << labels[static_cast<std::size_t>(i)] << ',' << pca.coordinates(0, i) << ','
        << pca.coordinates(1, i) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ReconstructionReport reconstruction_report(const SAEModel& sae, const Eigen::MatrixXd& x, double unit_scale) {
  if (x.cols() == 0) throw std::invalid_argument("reconstruction_report: no samples");
  const Eigen::MatrixXd r = decode(sae, encode(sae, x));
  ReconstructionReport rep;
  rep.count = static_cast<std::size_t>(x.cols());
  std::vector<double> per_sample;
  const Index v = x.rows() / 3;
  double l1 = 0.0;
  for (Index c = 0; c < x.cols(); ++c) {
    per_sample.push_back(mean_vertex_distance(x.col(c), r.col(c)) * unit_scale);
    l1 += (x.col(c) - r.col(c)).cwiseAbs().sum();
  }
  for (double e : per_sample) rep.mean += e;
  rep.mean /= static_cast<double>(per_sample.size());
  std::sort(per_sample.begin(), per_sample.end());
  const std::size_t m = per_sample.size();
  rep.median = m % 2 ? per_sample[m / 2] : 0.5 * (per_sample[m / 2 - 1] + per_sample[m / 2]);
  rep.mean_vertex_l1 = l1 / static_cast<double>(x.cols() * v) * unit_scale;
  return rep;
}

nlohmann::json MetricReport::to_json() const {
  return {{"div", div},
          {"div_id", div_id},
          {"div_exp", div_exp},
          {"sp", sp},
          {"sp_mean_over_training", sp_mean_over_training},
          {"sp_units", sp_units},
          {"sp_mode", "nearest"},
          {"n_pairs", n_pairs},
          {"n_specificity", n_specificity},
          {"n_generated", n_generated},
          {"level", level},
          {"seed", seed},
          {"id_mode", id_mode},
          {"training_diversity", training_diversity}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  r.div = j.at("div").get<double>();
  r.div_id = j.at("div_id").get<double>();
  r.div_exp = j.at("div_exp").get<double>();
  r.sp = j.at("sp").get<double>();
  r.sp_mean_over_training = j.at("sp_mean_over_training").get<double>();
  r.sp_units = j.at("sp_units").get<std::string>();
  r.n_pairs = j.at("n_pairs").get<std::size_t>();
  r.n_specificity = j.at("n_specificity").get<std::size_t>();
  r.n_generated = j.at("n_generated").get<std::size_t>();
  r.level = j.at("level").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.id_mode = j.at("id_mode").get<std::string>();
  r.training_diversity = j.at("training_diversity").get<double>();
  return r;
}

MetricReport evaluate(const SAEModel& sae, const ShapeGAN& gan, const Dataset& training, const MetricConfig& config) {
  if (training.empty()) throw std::invalid_argument("evaluate: empty training set");
  if (config.n_generated < 2) throw std::invalid_argument("evaluate: need at least 2 generated samples");
  MetricReport r;
  r.n_pairs = config.n_pairs;
  r.n_specificity = std::min(config.n_specificity, config.n_generated);
  r.n_generated = config.n_generated;
  r.level = config.level;
  r.seed = config.seed;
  r.id_mode = to_string(gan.arch.id_mode);

  Rng rng(config.seed);
  const std::uint64_t gen_seed = rng.next();
  Rng div_rng = rng.split();
  Rng train_rng = rng.split();
  const std::uint64_t id_seed = rng.next();
  const std::uint64_t exp_seed = rng.next();

  const Eigen::MatrixXd train = training.stacked();
  BatchSpec spec;
  spec.count = config.n_generated;
  spec.exp.level = config.level;
  spec.seed = gen_seed;
  const GeneratedBatch gen = batch_generate(sae, gan, training.topology, spec);
  const Eigen::MatrixXd g = gen.dataset.stacked();

  r.training_diversity = raw_diversity(train, config.n_pairs, train_rng);
  r.div = diversity(g, config.n_pairs, r.training_diversity, div_rng);

  ControlledConfig cc;
  cc.n_pairs = config.n_controlled_pairs;
  cc.level = config.level;
  cc.mode = ControlMode::vary_id_fix_exp;
  cc.seed = id_seed;
  r.div_id = diversity_controlled(gan, sae, training, cc).value;
  cc.mode = ControlMode::vary_exp_fix_id;
  cc.seed = exp_seed;
  r.div_exp = diversity_controlled(gan, sae, training, cc).value;

  const double unit = training.normalization ? training.normalization->scale : 1.0;
  r.sp_units = training.normalization ? training.units : "normalized";
  r.sp = unit * specificity(g, train, r.n_specificity, SpecificityMode::nearest);
  r.sp_mean_over_training = unit * specificity(g, train, r.n_specificity, SpecificityMode::mean_over_training);
  return r;
}

}  // namespace ffl
