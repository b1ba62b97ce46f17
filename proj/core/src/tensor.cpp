#include "hnmt/tensor.hpp"

#include "hnmt/rng.hpp"

namespace hnmt {

std::string shape_str(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

ParameterSet::ParameterSet(const ParameterSet& other) { *this = other; }

ParameterSet& ParameterSet::operator=(const ParameterSet& other) {
  if (this == &other) return *this;
  params_.clear();
  index_.clear();
  for (const auto& p : other.params_) {
    Parameter& q = add(p->name, p->value.rows(), p->value.cols());
    q.value = p->value;
    q.grad = p->grad;
  }
  return *this;
}

Parameter& ParameterSet::add(std::string name, Index rows, Index cols) {
  if (rows <= 0 || cols <= 0) {
    throw ShapeError("parameter '" + name + "' needs positive dimensions");
  }
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Matrix::Zero(rows, cols);
  p->grad = Matrix::Zero(rows, cols);
  index_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterSet::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParameterSet::at(std::string_view name) {
  Parameter* p = find(name);
  if (!p) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  return *p;
}

const Parameter& ParameterSet::at(std::string_view name) const {
  const Parameter* p = find(name);
  if (!p) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  return *p;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void ParameterSet::init_uniform(Rng& rng, double scale) {
  for (auto& p : params_) {
    double* v = p->value.data();
    for (Index i = 0; i < p->value.size(); ++i) v[i] = rng.uniform(-scale, scale);
  }
}

std::size_t ParameterSet::num_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

}  // namespace hnmt
