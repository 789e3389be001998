#pragma once

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lumiforge/nn/tensor.hpp"

#include "lumiforge/error.hpp"
#include "lumiforge/scene.hpp"

namespace lumiforge::nn {

struct ParamInfo {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Flat gradient buffer laid out like the owning ParamStore.
template <class T>
struct GradBuffer {
    AlignedVector<T> data;

    std::span<T> view(const ParamInfo& p) { return std::span<T>(data).subspan(p.offset, p.size); }
    void zero() { std::fill(data.begin(), data.end(), T(0)); }
};

/// Named parameters in one contiguous buffer, with a gradient buffer of the
/// same layout and Adam moment estimates.
template <class T>
class ParamStore {
public:
    std::size_t add(std::string name, std::vector<std::size_t> shape) {
        ParamInfo p{std::move(name), std::move(shape), values_.size(), 0};
        p.size = std::accumulate(p.shape.begin(), p.shape.end(), std::size_t{1}, std::multiplies<>());
        values_.resize(values_.size() + p.size, T(0));
        grads_.resize(values_.size(), T(0));
        adam_m_.resize(values_.size(), T(0));
        adam_v_.resize(values_.size(), T(0));
        infos_.push_back(std::move(p));
        return infos_.size() - 1;
    }

    const std::vector<ParamInfo>& infos() const { return infos_; }
    const ParamInfo& info(std::size_t id) const { return infos_.at(id); }
    std::size_t count() const { return values_.size(); }

    std::span<const T> value(std::size_t id) const { return std::span<const T>(values_).subspan(infos_[id].offset, infos_[id].size); }
    std::span<T> value(std::size_t id) { return std::span<T>(values_).subspan(infos_[id].offset, infos_[id].size); }
    std::span<T> grad(std::size_t id) { return std::span<T>(grads_).subspan(infos_[id].offset, infos_[id].size); }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }
    std::span<T> grads() { return grads_; }
    std::span<const T> grads() const { return grads_; }
    std::span<T> adam_m() { return adam_m_; }
    std::span<T> adam_v() { return adam_v_; }
    std::span<const T> adam_m() const { return adam_m_; }
    std::span<const T> adam_v() const { return adam_v_; }
    std::uint64_t adam_step() const { return adam_t_; }
    void set_adam_step(std::uint64_t t) { adam_t_ = t; }

    GradBuffer<T> make_grad_buffer() const { return {AlignedVector<T>(values_.size(), T(0))}; }
    void zero_grads() { std::fill(grads_.begin(), grads_.end(), T(0)); }

    /// grads += buffer (element-wise, fixed order).
    void accumulate(const GradBuffer<T>& b) {
        for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += b.data[i];
    }

private:
    std::vector<ParamInfo> infos_;
    AlignedVector<T> values_;
    AlignedVector<T> grads_;
    AlignedVector<T> adam_m_;
    AlignedVector<T> adam_v_;
    std::uint64_t adam_t_ = 0;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
void adam_step(ParamStore<T>& store, const AdamConfig& cfg) {
    store.set_adam_step(store.adam_step() + 1);
    const double t = double(store.adam_step());
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    auto w = store.values();
    auto g = store.grads();
    auto m = store.adam_m();
    auto v = store.adam_v();
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = double(g[i]);
        const double mi = cfg.beta1 * double(m[i]) + (1.0 - cfg.beta1) * gi;
        const double vi = cfg.beta2 * double(v[i]) + (1.0 - cfg.beta2) * gi * gi;
        m[i] = T(mi);
        v[i] = T(vi);
        w[i] = T(double(w[i]) - cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
    }
}

/// U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <class T>
void he_uniform(std::span<T> w, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / double(std::max<std::size_t>(1, fan_in)));
    for (T& v : w) v = T(draw_uniform(rng, -bound, bound));
}

inline double draw_normal(std::mt19937_64& rng) {
    // Box-Muller on the portable uniform draw.
    const double u1 = std::max(draw_uniform(rng, 0.0, 1.0), 1e-300);
    const double u2 = draw_uniform(rng, 0.0, 1.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Fills `rows` x `cols` (row-major) with a semi-orthogonal matrix.
template <class T>
void orthogonal(std::span<T> w, std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    if (w.size() != rows * cols) throw ShapeError("orthogonal init: size mismatch");
    const std::size_t big = std::max(rows, cols), small = std::min(rows, cols);
    Eigen::MatrixXd a(big, small);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = draw_normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
    // Sign fix so the result does not depend on the QR's sign convention.
    const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
    for (std::size_t j = 0; j < small; ++j)
        if (r(Eigen::Index(j), Eigen::Index(j)) < 0) q.col(Eigen::Index(j)) *= -1.0;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            w[i * cols + j] = T(rows >= cols ? q(Eigen::Index(i), Eigen::Index(j)) : q(Eigen::Index(j), Eigen::Index(i)));
}

}  // namespace lumiforge::nn
