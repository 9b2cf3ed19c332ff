#include "scagan/optim.hpp"

#include <cmath>

namespace scagan {

Adam::Adam(std::vector<ModelParams*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (ModelParams* p : params_)
    for (const auto& [name, v] : p->entries()) {
      m_.emplace_back(v.shape());
      v_.emplace_back(v.shape());
    }
}

void Adam::step(double lr) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  std::size_t k = 0;
  for (ModelParams* p : params_)
    for (auto& [name, var] : p->entries()) {
      Tensor& m = m_[k];
      Tensor& v = v_[k];
      ++k;
      if (!var.has_grad()) continue;
      const Tensor g = var.grad();
      Tensor& x = var.mutable_value();
      for (std::size_t i = 0; i < x.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
      }
    }
}

void Adam::zero_grad() {
  for (ModelParams* p : params_) p->zero_grad();
}

void Adam::write_to(Archive& ar, const std::string& prefix) const {
  ar.meta["optimizers"][prefix] = {{"beta1", config_.beta1}, {"beta2", config_.beta2}, {"eps", config_.eps},
                                   {"steps", t_}};
  for (std::size_t k = 0; k < m_.size(); ++k) {
    ar.put(prefix + "/m" + std::to_string(k), m_[k]);
    ar.put(prefix + "/v" + std::to_string(k), v_[k]);
  }
}

void Adam::read_from(const Archive& ar, const std::string& prefix) {
  const auto& meta = ar.meta.at("optimizers").at(prefix);
  config_.beta1 = meta.at("beta1").get<double>();
  config_.beta2 = meta.at("beta2").get<double>();
  config_.eps = meta.at("eps").get<double>();
  t_ = meta.at("steps").get<std::uint64_t>();
  for (std::size_t k = 0; k < m_.size(); ++k) {
    const Tensor& m = ar.get(prefix + "/m" + std::to_string(k));
    const Tensor& v = ar.get(prefix + "/v" + std::to_string(k));
    if (m.shape() != m_[k].shape() || v.shape() != v_[k].shape()) {
      throw ArchiveError("optimizer state '" + prefix + "' does not match the model");
    }
    m_[k] = m;
    v_[k] = v;
  }
}

}  // namespace scagan
