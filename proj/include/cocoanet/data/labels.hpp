#pragma once

#include <array>
#include <string>
#include <vector>

#include "../core/error.hpp"
#include "../core/tensor.hpp"

namespace cocoanet {

// Canonical class order for the cocoa disease task: sorted directory names.
inline constexpr std::array<const char*, 3> kCocoaClasses = {"Anthracnose", "CSSVD", "Healthy"};

inline std::size_t label_index(const std::vector<std::string>& class_names,
                               const std::string& label) {
    for (std::size_t i = 0; i < class_names.size(); ++i)
        if (class_names[i] == label) return i;
    throw InputError("unknown class label \"" + label + "\"");
}

inline TensorF one_hot(std::size_t index, std::size_t num_classes) {
    if (index >= num_classes)
        throw InputError("class index " + std::to_string(index) + " out of range for " +
                         std::to_string(num_classes) + " classes");
    TensorF t({num_classes});
    t[index] = 1.0f;
    return t;
}

} // namespace cocoanet
