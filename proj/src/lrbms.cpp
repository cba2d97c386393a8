#include "lrbms/lrbms.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "lrbms/io.hpp"

namespace lrbms {

int ReducedModel::size() const {
  int n = 0;
  for (const auto& b : basis)
    n += static_cast<int>(b.size());
  return n;
}

std::vector<int> ReducedModel::offsets() const {
  std::vector<int> offs(basis.size());
  int n = 0;
  for (std::size_t t = 0; t < basis.size(); ++t) {
    offs[t] = n;
    n += static_cast<int>(basis[t].size());
  }
  return offs;
}

std::vector<SparseMatrix> local_product_matrices(const AssembledOperator& op,
                                                 const Parameter& mu_hat) {
  const NestedGrid& grid = op.problem->grid();
  const SparseMatrix combined = op.combined(mu_hat);
  std::vector<SparseMatrix> products;
  products.reserve(grid.num_coarse());
  for (std::size_t c = 0; c < grid.num_coarse(); ++c) {
    const auto& elems = grid.coarse(static_cast<int>(c)).fine_elements;
    std::vector<int> indices;
    indices.reserve(3 * elems.size());
    for (int t : elems)
      for (int k = 0; k < 3; ++k)
        indices.push_back(3 * t + k);
    products.push_back(combined.submatrix(indices));
  }
  return products;
}

namespace {

double gram_norm(const SparseMatrix& gram, const Vector& v) {
  return std::sqrt(std::max(0.0, dot(v, gram * v)));
}

/// Modified Gram-Schmidt against an orthonormal family, two passes. The family
/// is never touched; the candidate is appended when its remainder survives.
bool gram_extend(std::vector<Vector>& basis, const SparseMatrix& gram, Vector v,
                 double drop_tol) {
  const double norm0 = gram_norm(gram, v);
  if (!(norm0 > 0.0))
    return false;
  for (int pass = 0; pass < 2; ++pass)
    for (const Vector& b : basis)
      axpy(-dot(b, gram * v), b, v);
  const double rem = gram_norm(gram, v);
  if (rem <= drop_tol * norm0)
    return false;
  scale(1.0 / rem, v);
  basis.push_back(std::move(v));
  return true;
}

double block_dot(const NestedGrid& grid, const Vector& global, int coarse, const Vector& block) {
  const auto& elems = grid.coarse(coarse).fine_elements;
  double s = 0.0;
  for (std::size_t i = 0; i < elems.size(); ++i)
    for (int k = 0; k < 3; ++k)
      s += global[3 * static_cast<std::size_t>(elems[i]) + static_cast<std::size_t>(k)] *
           block[3 * i + static_cast<std::size_t>(k)];
  return s;
}

}  // namespace

ReducedModel seed_constant_model(const ParametricProblem& problem, const AssembledOperator& op,
                                 const Parameter& mu_hat) {
  const NestedGrid& grid = problem.grid();
  ReducedModel model;
  model.coarse_per_dim = grid.coarse_per_dim();
  model.fine_per_dim = grid.fine_per_dim();
  model.penalty_factor = op.penalty_factor;
  model.mu_hat = mu_hat;
  model.basis.resize(grid.num_coarse());

  const std::vector<SparseMatrix> products = local_product_matrices(op, mu_hat);
  for (std::size_t c = 0; c < grid.num_coarse(); ++c) {
    Vector ones(3 * grid.coarse(static_cast<int>(c)).fine_elements.size(), 1.0);
    if (!gram_extend(model.basis[c], products[c], std::move(ones), 0.0))
      throw std::runtime_error("seed_constant_model: element constant has zero product norm");
  }
  rebuild_projection(model, problem, op);
  return model;
}

int extend_model(ReducedModel& model, const ParametricProblem& problem,
                 const AssembledOperator& op, const DGFunction& snapshot, double drop_tol) {
  const NestedGrid& grid = problem.grid();
  const std::vector<SparseMatrix> products = local_product_matrices(op, model.mu_hat);
  int grown = 0;
  for (std::size_t c = 0; c < grid.num_coarse(); ++c)
    if (gram_extend(model.basis[c], products[c], snapshot.restrict_to(static_cast<int>(c)),
                    drop_tol))
      ++grown;
  if (grown > 0)
    rebuild_projection(model, problem, op);
  return grown;
}

void rebuild_projection(ReducedModel& model, const ParametricProblem& problem,
                        const AssembledOperator& op) {
  const NestedGrid& grid = problem.grid();
  const std::size_t ncomp = op.components.size();
  const int n = model.size();
  const std::vector<int> offs = model.offsets();

  model.components.assign(ncomp, DenseMatrix(static_cast<std::size_t>(n),
                                             static_cast<std::size_t>(n)));
  model.rhs.assign(static_cast<std::size_t>(n), 0.0);

  Vector phi(op.num_dofs());
  Vector image(op.num_dofs());
  for (std::size_t cb = 0; cb < grid.num_coarse(); ++cb) {
    const auto& elems = grid.coarse(static_cast<int>(cb)).fine_elements;
    for (std::size_t nb = 0; nb < model.basis[cb].size(); ++nb) {
      std::fill(phi.begin(), phi.end(), 0.0);
      const Vector& block = model.basis[cb][nb];
      for (std::size_t i = 0; i < elems.size(); ++i)
        for (int k = 0; k < 3; ++k)
          phi[3 * static_cast<std::size_t>(elems[i]) + static_cast<std::size_t>(k)] =
              block[3 * i + static_cast<std::size_t>(k)];
      const std::size_t col = static_cast<std::size_t>(offs[cb]) + nb;
      for (std::size_t k = 0; k < ncomp; ++k) {
        op.components[k].multiply(phi, image);
        for (std::size_t ca = 0; ca < grid.num_coarse(); ++ca)
          for (std::size_t na = 0; na < model.basis[ca].size(); ++na)
            model.components[k](static_cast<std::size_t>(offs[ca]) + na, col) =
                block_dot(grid, image, static_cast<int>(ca), model.basis[ca][na]);
      }
    }
  }
  // The exact components are symmetric; enforce it on the projections.
  for (auto& m : model.components)
    m.symmetrize();

  for (std::size_t ca = 0; ca < grid.num_coarse(); ++ca)
    for (std::size_t na = 0; na < model.basis[ca].size(); ++na)
      model.rhs[static_cast<std::size_t>(offs[ca]) + na] =
          block_dot(grid, op.rhs, static_cast<int>(ca), model.basis[ca][na]);
}

void rebuild_estimator(ReducedModel& model, const ParametricProblem& problem) {
  model.estimator = offline_decompose(problem, model.basis, model.mu_hat, model.penalty_factor);
}

Vector solve_reduced(const ReducedModel& model, const ParametricProblem& problem,
                     const Parameter& mu) {
  const std::size_t ncomp = model.components.size();
  if (ncomp == 0)
    throw std::invalid_argument("solve_reduced: model has no projected components");
  const std::size_t n = model.rhs.size();
  DenseMatrix a(n, n);
  for (std::size_t k = 0; k < ncomp; ++k) {
    const double w = problem.lambda().coefficient(k, mu);
    for (std::size_t i = 0; i < n * n; ++i)
      a.data()[i] += w * model.components[k].data()[i];
  }
  return dense_solve(std::move(a), model.rhs);
}

std::vector<Vector> split_coefficients(const ReducedModel& model, const Vector& stacked) {
  if (stacked.size() != static_cast<std::size_t>(model.size()))
    throw std::invalid_argument("split_coefficients: size mismatch");
  std::vector<Vector> blocks(model.num_elements());
  std::size_t pos = 0;
  for (std::size_t t = 0; t < model.num_elements(); ++t) {
    blocks[t].assign(stacked.begin() + static_cast<std::ptrdiff_t>(pos),
                     stacked.begin() + static_cast<std::ptrdiff_t>(pos + model.basis[t].size()));
    pos += model.basis[t].size();
  }
  return blocks;
}

DGFunction expand_reduced(const ReducedModel& model, const NestedGrid& grid,
                          const Vector& stacked) {
  if (stacked.size() != static_cast<std::size_t>(model.size()))
    throw std::invalid_argument("expand_reduced: size mismatch");
  DGFunction u(grid);
  const std::vector<int> offs = model.offsets();
  for (std::size_t t = 0; t < model.num_elements(); ++t)
    for (std::size_t n = 0; n < model.basis[t].size(); ++n)
      u.add_scaled_block(static_cast<int>(t), model.basis[t][n],
                         stacked[static_cast<std::size_t>(offs[t]) + n]);
  return u;
}

GreedyResult greedy_train(ReducedModel& model, const ParametricProblem& problem,
                          const AssembledOperator& op, std::span<const Parameter> training,
                          const GreedyOptions& options) {
  if (training.empty())
    throw std::invalid_argument("greedy_train: empty training set");
  if (options.max_extensions < 1)
    throw std::invalid_argument("greedy_train: at least one extension must be allowed");

  GreedyResult result;
  for (int sweep = 0; sweep < options.max_extensions; ++sweep) {
    double max_eta = -std::numeric_limits<double>::infinity();
    int selected = -1;
    for (std::size_t i = 0; i < training.size(); ++i) {
      const Parameter& mu = training[i];
      const Vector c = solve_reduced(model, problem, mu);
      const DGFunction p = expand_reduced(model, problem.grid(), c);
      const Parameter& mu_bar = options.fixed_mu_bar ? *options.fixed_mu_bar : mu;
      const EstimatorReport report =
          eta_global(problem, p, mu, mu_bar, model.mu_hat, model.penalty_factor);
      if (report.eta > max_eta) {
        max_eta = report.eta;
        selected = static_cast<int>(i);
      }
    }
    GreedyStep step;
    step.selected = selected;
    step.max_eta = max_eta;
    step.size_before = model.size();
    step.size_after = step.size_before;
    if (max_eta <= options.tolerance) {
      result.history.push_back(step);
      result.converged = true;
      break;
    }
    const DGFunction snapshot = solve_dg(op, training[static_cast<std::size_t>(selected)]);
    const int grown = extend_model(model, problem, op, snapshot, options.drop_tol);
    step.size_after = model.size();
    result.history.push_back(step);
    if (grown == 0)
      break;  // the snapshot is already represented; further sweeps cannot improve
  }
  rebuild_estimator(model, problem);
  return result;
}

namespace {

std::string element_prefix(std::size_t t) { return "est/" + std::to_string(t) + "/"; }

}  // namespace

void save_model(const ReducedModel& model, const std::string& dir) {
  if (model.estimator.basis_sizes.size() != model.num_elements())
    throw std::logic_error("save_model: estimator blocks missing, rebuild them first");
  for (std::size_t t = 0; t < model.num_elements(); ++t)
    if (model.estimator.basis_sizes[t] != model.basis_size(t))
      throw std::logic_error("save_model: estimator blocks are stale, rebuild them first");

  std::filesystem::create_directories(dir);

  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["coarse_per_dim"] = model.coarse_per_dim;
  manifest["fine_per_dim"] = model.fine_per_dim;
  manifest["penalty_factor"] = model.penalty_factor;
  manifest["mu_hat"] = model.mu_hat.values;
  std::vector<int> sizes;
  for (const auto& b : model.basis)
    sizes.push_back(static_cast<int>(b.size()));
  manifest["basis_sizes"] = sizes;
  manifest["num_components"] = model.components.size();
  manifest["records"] = "model.bin";
  {
    std::ofstream out(dir + "/manifest.json", std::ios::binary);
    if (!out)
      throw std::runtime_error("save_model: cannot write manifest in " + dir);
    out << manifest.dump(2) << '\n';
  }

  BinaryRecordWriter rec(dir + "/model.bin");
  for (std::size_t t = 0; t < model.num_elements(); ++t)
    for (std::size_t n = 0; n < model.basis[t].size(); ++n)
      rec.write_vector("basis/" + std::to_string(t) + "/" + std::to_string(n),
                       model.basis[t][n]);
  for (std::size_t k = 0; k < model.components.size(); ++k)
    rec.write_matrix("reduced/component_" + std::to_string(k), model.components[k]);
  rec.write_vector("reduced/rhs", model.rhs);

  const std::size_t ncomp = model.components.size();
  for (std::size_t t = 0; t < model.estimator.elements.size(); ++t) {
    const ElementEstimatorData& el = model.estimator.elements[t];
    const std::string prefix = element_prefix(t);
    Vector touching(el.touching.begin(), el.touching.end());
    rec.write_vector(prefix + "touching", touching);
    for (std::size_t k = 0; k < ncomp; ++k)
      rec.write_matrix(prefix + "nc_" + std::to_string(k), el.nc[k]);
    rec.write_matrix(prefix + "df_a", el.df_a);
    for (std::size_t k = 0; k < ncomp; ++k)
      rec.write_matrix(prefix + "df_b_" + std::to_string(k), el.df_b[k]);
    for (std::size_t k = 0; k < ncomp; ++k)
      for (std::size_t l = 0; l < ncomp; ++l)
        rec.write_matrix(prefix + "df_c_" + std::to_string(k) + "_" + std::to_string(l),
                         el.df_c[k][l]);
    rec.write_scalar(prefix + "r_ff", el.r_ff);
    for (std::size_t k = 0; k < ncomp; ++k)
      rec.write_vector(prefix + "r_fd_" + std::to_string(k), el.r_fd[k]);
    for (std::size_t k = 0; k < ncomp; ++k)
      for (std::size_t l = 0; l < ncomp; ++l)
        rec.write_matrix(prefix + "r_dd_" + std::to_string(k) + "_" + std::to_string(l),
                         el.r_dd[k][l]);
    rec.write_scalar(prefix + "r_scale", el.r_scale);
  }
  rec.close();
}

ReducedModel load_model(const std::string& dir) {
  nlohmann::json manifest;
  {
    std::ifstream in(dir + "/manifest.json");
    if (!in)
      throw std::runtime_error("load_model: cannot open " + dir + "/manifest.json");
    try {
      in >> manifest;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("load_model: malformed manifest: " + std::string(e.what()));
    }
  }
  if (!manifest.contains("format_version") || !manifest["format_version"].is_number_integer())
    throw ModelVersionError("load_model: manifest has no format version");
  if (manifest["format_version"].get<int>() != 1)
    throw ModelVersionError("load_model: unsupported model format version " +
                            manifest["format_version"].dump());

  ReducedModel model;
  try {
    model.coarse_per_dim = manifest.at("coarse_per_dim").get<int>();
    model.fine_per_dim = manifest.at("fine_per_dim").get<int>();
    model.penalty_factor = manifest.at("penalty_factor").get<double>();
    model.mu_hat.values = manifest.at("mu_hat").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_model: incomplete manifest: " + std::string(e.what()));
  }
  const std::vector<int> sizes = manifest.at("basis_sizes").get<std::vector<int>>();
  const std::size_t ncomp = manifest.at("num_components").get<std::size_t>();
  const std::string records = manifest.value("records", "model.bin");

  const std::size_t num_elements =
      static_cast<std::size_t>(model.coarse_per_dim) * static_cast<std::size_t>(model.coarse_per_dim);
  if (sizes.size() != num_elements)
    throw std::runtime_error("load_model: basis_sizes does not match the coarse grid");

  const BinaryRecordFile rec(dir + "/" + records);
  if (rec.version() != 1)
    throw ModelVersionError("load_model: unsupported record format version " +
                            std::to_string(rec.version()));

  model.basis.resize(num_elements);
  for (std::size_t t = 0; t < num_elements; ++t) {
    model.basis[t].resize(static_cast<std::size_t>(sizes[t]));
    for (std::size_t n = 0; n < model.basis[t].size(); ++n)
      model.basis[t][n] =
          rec.vector("basis/" + std::to_string(t) + "/" + std::to_string(n));
  }
  model.components.resize(ncomp);
  for (std::size_t k = 0; k < ncomp; ++k)
    model.components[k] = rec.matrix("reduced/component_" + std::to_string(k));
  model.rhs = rec.vector("reduced/rhs");
  if (model.rhs.size() != static_cast<std::size_t>(model.size()))
    throw std::runtime_error("load_model: reduced dimensions are inconsistent");

  EstimatorOfflineData& est = model.estimator;
  est.mu_hat = model.mu_hat;
  est.penalty_factor = model.penalty_factor;
  est.basis_sizes = sizes;
  est.elements.resize(num_elements);
  for (std::size_t t = 0; t < num_elements; ++t) {
    ElementEstimatorData& el = est.elements[t];
    const std::string prefix = element_prefix(t);
    const Vector touching = rec.vector(prefix + "touching");
    el.touching.assign(touching.begin(), touching.end());
    el.offsets.resize(el.touching.size());
    int offset = 0;
    for (std::size_t s = 0; s < el.touching.size(); ++s) {
      const int tc = el.touching[s];
      if (tc < 0 || static_cast<std::size_t>(tc) >= num_elements)
        throw std::runtime_error("load_model: touching index out of range");
      el.offsets[s] = offset;
      if (tc == static_cast<int>(t))
        el.self_offset = offset;
      offset += sizes[static_cast<std::size_t>(tc)];
    }
    el.stacked_size = offset;
    el.self_size = sizes[t];
    el.nc.resize(ncomp);
    for (std::size_t k = 0; k < ncomp; ++k)
      el.nc[k] = rec.matrix(prefix + "nc_" + std::to_string(k));
    el.df_a = rec.matrix(prefix + "df_a");
    el.df_b.resize(ncomp);
    for (std::size_t k = 0; k < ncomp; ++k)
      el.df_b[k] = rec.matrix(prefix + "df_b_" + std::to_string(k));
    el.df_c.assign(ncomp, std::vector<DenseMatrix>(ncomp));
    for (std::size_t k = 0; k < ncomp; ++k)
      for (std::size_t l = 0; l < ncomp; ++l)
        el.df_c[k][l] = rec.matrix(prefix + "df_c_" + std::to_string(k) + "_" + std::to_string(l));
    el.r_ff = rec.scalar(prefix + "r_ff");
    el.r_fd.resize(ncomp);
    for (std::size_t k = 0; k < ncomp; ++k)
      el.r_fd[k] = rec.vector(prefix + "r_fd_" + std::to_string(k));
    el.r_dd.assign(ncomp, std::vector<DenseMatrix>(ncomp));
    for (std::size_t k = 0; k < ncomp; ++k)
      for (std::size_t l = 0; l < ncomp; ++l)
        el.r_dd[k][l] = rec.matrix(prefix + "r_dd_" + std::to_string(k) + "_" + std::to_string(l));
    el.r_scale = rec.scalar(prefix + "r_scale");
    if (el.df_a.rows() != static_cast<std::size_t>(el.self_size) ||
        el.nc.size() != ncomp ||
        (el.stacked_size > 0 && el.nc[0].rows() != static_cast<std::size_t>(el.stacked_size)))
      throw std::runtime_error("load_model: estimator block dimensions are inconsistent");
  }
  return model;
}

}  // namespace lrbms
