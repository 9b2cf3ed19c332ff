#include "scagan/params.hpp"

#include <cstring>

#include "scagan/ops.hpp"

namespace scagan {

ModelParams::ModelParams(std::string kind, std::uint64_t fingerprint, std::uint64_t seed)
    : kind_(std::move(kind)), fingerprint_(fingerprint), seed_(seed) {}

Var& ModelParams::add(std::string name, Tensor init) {
  if (contains(name)) throw ParamError("duplicate parameter '" + name + "'");
  entries_.emplace_back(std::move(name), Var(std::move(init), true));
  return entries_.back().second;
}

const Var& ModelParams::at(std::string_view name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return v;
  }
  throw ParamError(kind_ + ": no parameter named '" + std::string(name) + "'");
}

Var& ModelParams::at(std::string_view name) {
  return const_cast<Var&>(std::as_const(*this).at(name));
}

bool ModelParams::contains(std::string_view name) const noexcept {
  for (const auto& [n, v] : entries_) {
    if (n == name) return true;
  }
  return false;
}

std::size_t ModelParams::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, v] : entries_) n += v.value().size();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& [name, v] : entries_) v.zero_grad();
}

bool ModelParams::identical_to(const ModelParams& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [na, va] = entries_[i];
    const auto& [nb, vb] = other.entries_[i];
    if (na != nb || va.shape() != vb.shape()) return false;
    if (std::memcmp(va.value().ptr(), vb.value().ptr(), va.value().size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

ModelParams ModelParams::clone() const {
  ModelParams copy(kind_, fingerprint_, seed_);
  for (const auto& [n, v] : entries_) copy.add(n, v.value());
  return copy;
}

void ModelParams::write_to(Archive& ar, const std::string& prefix) const {
  ar.meta["models"][prefix] = {{"kind", kind_},
                               {"fingerprint", hex64(fingerprint_)},
                               {"seed", seed_},
                               {"names", nlohmann::json::array()}};
  for (const auto& [n, v] : entries_) {
    ar.meta["models"][prefix]["names"].push_back(n);
    ar.put(prefix + "/" + n, v.value());
  }
}

ModelParams ModelParams::read_from(const Archive& ar, const std::string& prefix,
                                   std::uint64_t expected_fingerprint) {
  if (!ar.meta.contains("models") || !ar.meta["models"].contains(prefix)) {
    throw ParamError("archive has no model '" + prefix + "'");
  }
  const auto& m = ar.meta["models"][prefix];
  const std::string fp = m.at("fingerprint").get<std::string>();
  if (fp != hex64(expected_fingerprint)) {
    throw ParamError("model '" + prefix + "' fingerprint " + fp +
                     " does not match the configured architecture " + hex64(expected_fingerprint));
  }
  ModelParams p(m.at("kind").get<std::string>(), expected_fingerprint,
                m.at("seed").get<std::uint64_t>());
  for (const auto& name : m.at("names")) {
    const std::string n = name.get<std::string>();
    p.add(n, ar.get(prefix + "/" + n));
  }
  return p;
}

void ParamInit::conv(const std::string& name, int in_channels, int out_channels, int kernel,
                     double bias_init) {
  std::normal_distribution<double> normal(0.0, std_);
  Tensor w({out_channels, in_channels, kernel, kernel});
  for (double& v : w.data()) v = normal(rng_);
  params_.add(name + ".weight", std::move(w));
  params_.add(name + ".bias", Tensor({out_channels}, bias_init));
}

ConvRef conv_ref(const ModelParams& p, const std::string& name) {
  return {p.at(name + ".weight"), p.at(name + ".bias")};
}

Var apply_conv(const ModelParams& p, const std::string& name, const Var& x, int stride) {
  const ConvRef c = conv_ref(p, name);
  const int k = c.weight.dim(2);
  return ops::conv2d(x, c.weight, c.bias, stride, k / 2);
}

}  // namespace scagan
