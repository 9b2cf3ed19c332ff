#include "scagan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "scagan/log.hpp"

namespace scagan {
namespace {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) total += w[static_cast<std::size_t>(i)] = std::exp(-(i - c) * (i - c) / (2 * sigma * sigma));
  for (double& v : w) v /= total;
  return w;
}

void require_same(const ImageMap& a, const ImageMap& b, const char* what) {
  if (a.pixels.shape() != b.pixels.shape()) {
    throw MetricError(std::string(what) + ": shape mismatch " + shape_string(a.pixels.shape()) + " vs " +
                      shape_string(b.pixels.shape()));
  }
}

// Valid-mode separable filtering of one H x W plane.
std::vector<double> filter_valid(const double* x, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1, ow = w - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow), out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < h; ++y)
    for (int xo = 0; xo < ow; ++xo) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * x[y * w + xo + i];
      tmp[static_cast<std::size_t>(y) * ow + xo] = s;
    }
  for (int yo = 0; yo < oh; ++yo)
    for (int xo = 0; xo < ow; ++xo) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(yo + i) * ow + xo];
      out[static_cast<std::size_t>(yo) * ow + xo] = s;
    }
  return out;
}

double trace_sqrt_product(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, bool& ok) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(s1);
  if (e1.info() != Eigen::Success) {
    ok = false;
    return 0.0;
  }
  const double tol = 1e-10 * std::max(1.0, e1.eigenvalues().cwiseAbs().maxCoeff());
  if (e1.eigenvalues().minCoeff() < -tol) ok = false;
  const Eigen::VectorXd r1 = e1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd root1 = e1.eigenvectors() * r1.asDiagonal() * e1.eigenvectors().transpose();
  const Eigen::MatrixXd m = root1 * s2 * root1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(0.5 * (m + m.transpose()));
  if (em.info() != Eigen::Success) {
    ok = false;
    return 0.0;
  }
  const double tol_m = 1e-10 * std::max(1.0, em.eigenvalues().cwiseAbs().maxCoeff());
  if (em.eigenvalues().minCoeff() < -tol_m) ok = false;
  return em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

double ssim(const ImageMap& a, const ImageMap& b, const SsimParams& p) {
  require_same(a, b, "ssim");
  const Tensor& x = a.pixels;
  const Tensor& y = b.pixels;
  require_rank(x, 3, "ssim");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h < p.window || w < p.window) {
    throw MetricError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the " +
                      std::to_string(p.window) + "x" + std::to_string(p.window) + " window");
  }
  const auto k = gaussian_window(p.window, p.sigma);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> u(plane), v(plane), uu(plane), vv(plane), uv(plane);
  for (int ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < plane; ++i) {
      u[i] = (x[ch * plane + i] + 1.0) * 0.5;
      v[i] = (y[ch * plane + i] + 1.0) * 0.5;
      uu[i] = u[i] * u[i];
      vv[i] = v[i] * v[i];
      uv[i] = u[i] * v[i];
    }
    const auto mu_x = filter_valid(u.data(), h, w, k), mu_y = filter_valid(v.data(), h, w, k);
    const auto e_xx = filter_valid(uu.data(), h, w, k), e_yy = filter_valid(vv.data(), h, w, k);
    const auto e_xy = filter_valid(uv.data(), h, w, k);
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
      const double sx = e_xx[i] - mu_x[i] * mu_x[i];
      const double sy = e_yy[i] - mu_y[i] * mu_y[i];
      const double sxy = e_xy[i] - mu_x[i] * mu_y[i];
      total += ((2 * mu_x[i] * mu_y[i] + c1) * (2 * sxy + c2)) /
               ((mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (sx + sy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double mean_l1(const ImageMap& a, const ImageMap& b) {
  require_same(a, b, "l1");
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) s += std::fabs(a.pixels[i] - b.pixels[i]);
  return s / static_cast<double>(a.pixels.size());
}

GaussianStats gaussian_stats(const Eigen::MatrixXd& f) {
  if (f.rows() < 2) throw MetricError("gaussian_stats: need at least 2 feature vectors");
  GaussianStats s;
  s.mean = f.colwise().mean().transpose();
  const Eigen::MatrixXd centred = f.rowwise() - s.mean.transpose();
  s.cov = centred.transpose() * centred / static_cast<double>(f.rows() - 1);
  return s;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b, double eps) {
  if (a.mean.size() != b.mean.size()) throw MetricError("frechet_distance: dimensionality differs");
  const double mean_term = (a.mean - b.mean).squaredNorm();
  bool ok = true;
  double tr_sqrt = trace_sqrt_product(a.cov, b.cov, ok);
  if (!ok || !std::isfinite(tr_sqrt)) {
    log_warning("fid: covariance product is not positive semi-definite; adding " + std::to_string(eps) + " * I");
    const Eigen::MatrixXd reg = eps * Eigen::MatrixXd::Identity(a.cov.rows(), a.cov.cols());
    bool ok2 = true;
    tr_sqrt = trace_sqrt_product(a.cov + reg, b.cov + reg, ok2);
  }
  const double d = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  return std::max(d, 0.0);
}

double fid(const Eigen::MatrixXd& real, const Eigen::MatrixXd& fake) {
  if (real.cols() != fake.cols()) throw MetricError("fid: feature dimensionality differs");
  return frechet_distance(gaussian_stats(real), gaussian_stats(fake));
}

double inception_score(const Eigen::MatrixXd& p) {
  if (p.rows() < 1) throw MetricError("inception_score: no samples");
  const Eigen::RowVectorXd marginal = p.colwise().mean();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      if (p(i, j) > 0) kl += p(i, j) * (std::log(p(i, j)) - std::log(marginal(j)));
  return std::exp(kl / static_cast<double>(p.rows()));
}

Eigen::VectorXd ToyStatsEmbedder::embed(const ImageMap& image) const {
  const Tensor& t = image.pixels;
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
  Eigen::VectorXd out(c * 6);
  for (int ch = 0; ch < c; ++ch) {
    double s = 0, sq = 0, q[4] = {0, 0, 0, 0};
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = t[(static_cast<std::size_t>(ch) * h + y) * w + x];
        s += v;
        sq += v * v;
        q[(y * 2 / h) * 2 + (x * 2 / w)] += v;
      }
    const double n = static_cast<double>(h) * w;
    out(ch * 6) = s / n;
    out(ch * 6 + 1) = std::sqrt(std::max(sq / n - (s / n) * (s / n), 0.0));
    for (int i = 0; i < 4; ++i) out(ch * 6 + 2 + i) = q[i] / (n / 4);
  }
  return out;
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw MetricError("cannot write " + path.string());
  out << "pair_id";
  for (const auto& c : columns) out << ',' << c;
  out << '\n' << std::setprecision(10);
  for (std::size_t i = 0; i < pair_ids.size(); ++i) {
    out << pair_ids[i];
    for (const auto& c : columns) out << ',' << per_pair.at(c)[i];
    out << '\n';
  }
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(8) << "metric" << "  value\n";
  for (const auto& m : order) {
    os << std::setw(8) << m << "  ";
    if (summary.count(m)) {
      os << std::fixed << std::setprecision(4) << summary.at(m) << '\n';
    } else {
      os << "skipped: " << skipped.at(m) << '\n';
    }
  }
  os << "(" << pair_ids.size() << " pairs)\n";
  return os.str();
}

EvalReport evaluate(const std::vector<std::string>& ids, const std::vector<ImageMap>& generated,
                    const std::vector<ImageMap>& truth, const std::vector<std::string>& metrics,
                    const Extractors& extractors) {
  if (ids.size() != generated.size() || ids.size() != truth.size()) throw MetricError("evaluate: list sizes differ");
  EvalReport r;
  r.pair_ids = ids;
  auto per_pair_metric = [&](const std::string& name, auto fn) {
    r.columns.push_back(name);
    auto& col = r.per_pair[name];
    double total = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      col.push_back(fn(generated[i], truth[i]));
      total += col.back();
    }
    r.summary[name] = ids.empty() ? 0.0 : total / static_cast<double>(ids.size());
  };
  for (const auto& m : metrics) {
    if (std::find(r.order.begin(), r.order.end(), m) != r.order.end()) continue;
    r.order.push_back(m);
    if (m == "ssim") {
      per_pair_metric("ssim", [](const ImageMap& a, const ImageMap& b) { return ssim(a, b); });
    } else if (m == "l1") {
      per_pair_metric("l1", [](const ImageMap& a, const ImageMap& b) { return mean_l1(a, b); });
    } else if (m == "lpips") {
      if (!extractors.lpips) {
        r.skipped["lpips"] = "extractor missing";
        continue;
      }
      per_pair_metric("lpips", [&](const ImageMap& a, const ImageMap& b) { return extractors.lpips->distance(a, b); });
    } else if (m == "fid") {
      if (!extractors.fid) {
        r.skipped["fid"] = "extractor missing";
        continue;
      }
      if (ids.size() < 2) {
        r.skipped["fid"] = "needs at least 2 images";
        continue;
      }
      std::vector<Eigen::VectorXd> fr, ff;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        ff.push_back(extractors.fid->embed(generated[i]));
        fr.push_back(extractors.fid->embed(truth[i]));
      }
      Eigen::MatrixXd real(static_cast<Eigen::Index>(ids.size()), fr[0].size()), fake(real.rows(), real.cols());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        real.row(static_cast<Eigen::Index>(i)) = fr[i].transpose();
        fake.row(static_cast<Eigen::Index>(i)) = ff[i].transpose();
      }
      r.summary["fid"] = fid(real, fake);
    } else if (m == "is") {
      if (!extractors.is) {
        r.skipped["is"] = "extractor missing";
        continue;
      }
      std::vector<Eigen::VectorXd> rows;
      for (const auto& g : generated) rows.push_back(extractors.is->probabilities(g));
      if (rows.empty()) {
        r.skipped["is"] = "no images";
        continue;
      }
      Eigen::MatrixXd p(static_cast<Eigen::Index>(rows.size()), rows[0].size());
      for (std::size_t i = 0; i < rows.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
      r.summary["is"] = inception_score(p);
    } else {
      throw MetricError("unknown metric '" + m + "' (ssim, l1, fid, is, lpips)");
    }
  }
  return r;
}

EvalReport evaluate_directories(const std::filesystem::path& generated_dir, const std::filesystem::path& truth_dir,
                                const std::vector<std::string>& metrics, const Extractors& extractors) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(generated_dir)) throw MetricError("not a directory: " + generated_dir.string());
  if (!fs::is_directory(truth_dir)) throw MetricError("not a directory: " + truth_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(generated_dir))
    if (e.is_regular_file() && e.path().extension() == ".png" && fs::exists(truth_dir / e.path().filename()))
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::string> ids;
  std::vector<ImageMap> gen, truth;
  for (const auto& f : files) {
    ids.push_back(f.stem().string());
    gen.push_back(normalize_image(read_image(f, 3)));
    truth.push_back(normalize_image(read_image(truth_dir / f.filename(), 3)));
  }
  if (ids.empty()) throw MetricError("no matching PNG files between " + generated_dir.string() + " and " + truth_dir.string());
  return evaluate(ids, gen, truth, metrics, extractors);
}

}  // namespace scagan
