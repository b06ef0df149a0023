#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sketchedit/aligned.hpp"

namespace sketchedit {

template <typename T>
struct ParamTensor {
    std::string name;
    std::vector<int> shape;
    AlignedVector<T> values;
};

/// Ordered collection of named parameter tensors. Gradients and optimizer
/// moments use the same layout (see zeros_like).
template <typename T>
class ParamSetT {
public:
    /// Appends a zero-filled tensor and returns its index.
    std::size_t add(std::string name, std::vector<int> shape);

    std::size_t index(std::string_view name) const;
    bool contains(std::string_view name) const { return by_name_.contains(std::string(name)); }

    ParamTensor<T>& operator[](std::size_t i) { return tensors_[i]; }
    const ParamTensor<T>& operator[](std::size_t i) const { return tensors_[i]; }
    ParamTensor<T>& operator[](std::string_view name) { return tensors_[index(name)]; }
    const ParamTensor<T>& operator[](std::string_view name) const { return tensors_[index(name)]; }

    T* data(std::size_t i) { return tensors_[i].values.data(); }
    const T* data(std::size_t i) const { return tensors_[i].values.data(); }

    std::size_t size() const { return tensors_.size(); }
    std::size_t count() const;
    auto begin() { return tensors_.begin(); }
    auto end() { return tensors_.end(); }
    auto begin() const { return tensors_.begin(); }
    auto end() const { return tensors_.end(); }

    ParamSetT zeros_like() const;
    void set_zero();

    template <typename U>
    ParamSetT<U> cast() const {
        ParamSetT<U> out;
        for (const auto& t : tensors_) {
            const auto i = out.add(t.name, t.shape);
            for (std::size_t k = 0; k < t.values.size(); ++k) out[i].values[k] = static_cast<U>(t.values[k]);
        }
        return out;
    }

    bool operator==(const ParamSetT& other) const;

private:
    std::vector<ParamTensor<T>> tensors_;
    std::unordered_map<std::string, std::size_t> by_name_;
};

template <typename T>
bool operator==(const ParamTensor<T>& a, const ParamTensor<T>& b) {
    return a.name == b.name && a.shape == b.shape && a.values == b.values;
}

using ParamSet = ParamSetT<float>;

}  // namespace sketchedit
