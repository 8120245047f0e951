#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldt/common.hpp"

namespace ldt {

struct Parameter {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
};

// Named parameter registry; the optimizer, checkpointing, and the finite
// difference check all iterate over the same flat list.
class ParamStore {
  public:
    size_t add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        if (index_.count(name)) throw std::logic_error("duplicate parameter: " + name);
        index_[name] = params_.size();
        params_.push_back({name, Eigen::MatrixXd::Zero(rows, cols), Eigen::MatrixXd::Zero(rows, cols)});
        return params_.size() - 1;
    }

    Parameter& at(size_t i) { return params_[i]; }
    const Parameter& at(size_t i) const { return params_[i]; }
    const Eigen::MatrixXd& value(size_t i) const { return params_[i].value; }

    Parameter& named(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
        return params_[it->second];
    }

    size_t size() const { return params_.size(); }

    size_t scalar_count() const {
        size_t n = 0;
        for (const auto& p : params_) n += size_t(p.value.size());
        return n;
    }

    void zero_grads() {
        for (auto& p : params_) p.grad.setZero();
    }

    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }

  private:
    std::vector<Parameter> params_;
    std::map<std::string, size_t> index_;
};

// Adam with bias correction and a fixed learning rate.
class AdamOptimizer {
  public:
    AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& store) {
        if (m_.empty()) {
            for (const auto& p : store.all()) {
                m_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
                v_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < store.size(); ++i) {
            auto& p = store.at(i);
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
            p.value.array() -=
                lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
        }
    }

    long steps_taken() const { return t_; }

    // Moment estimates survive a rate change, so schedules adjust freely.
    void set_learning_rate(double lr) { lr_ = lr; }

  private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
};

}  // namespace ldt
