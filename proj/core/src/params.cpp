#include "sketchedit/params.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace sketchedit {

template <typename T>
std::size_t ParamSetT<T>::add(std::string name, std::vector<int> shape) {
    if (by_name_.contains(name)) throw std::invalid_argument("ParamSet: duplicate parameter '" + name + "'");
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                          [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
    by_name_.emplace(name, tensors_.size());
    tensors_.push_back({std::move(name), std::move(shape), AlignedVector<T>(n, T(0))});
    return tensors_.size() - 1;
}

template <typename T>
std::size_t ParamSetT<T>::index(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) throw std::out_of_range("ParamSet: no parameter '" + std::string(name) + "'");
    return it->second;
}

template <typename T>
std::size_t ParamSetT<T>::count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.values.size();
    return n;
}

template <typename T>
ParamSetT<T> ParamSetT<T>::zeros_like() const {
    ParamSetT out;
    for (const auto& t : tensors_) out.add(t.name, t.shape);
    return out;
}

template <typename T>
void ParamSetT<T>::set_zero() {
    for (auto& t : tensors_) std::fill(t.values.begin(), t.values.end(), T(0));
}

template <typename T>
bool ParamSetT<T>::operator==(const ParamSetT& other) const {
    return tensors_ == other.tensors_;
}

template class ParamSetT<float>;
template class ParamSetT<double>;

}  // namespace sketchedit
