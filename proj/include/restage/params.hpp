#pragma once

#include <array>
#include <string>
#include <vector>

#include "restage/scene.hpp"

namespace restage {

// Flat views of the optimizable state, grouped so the optimizer can apply
// per-group step multipliers. Layouts:
//   basis_rot   [(k * T + t) * 4 + c]   quaternion w-x-y-z
//   basis_trans [(k * T + t) * 3 + c]
//   coeffs      [row * K + k]
//   mu          [splat * 3 + c]         all splats
//   opacity     [splat]
enum class ParamGroup { BasisRot = 0, BasisTrans, Coeffs, Mu, Opacity };
inline constexpr int kNumParamGroups = 5;
const char* param_group_name(ParamGroup g);

struct ParamVector {
    std::array<std::vector<double>, kNumParamGroups> groups;

    std::vector<double>& operator[](ParamGroup g) { return groups[static_cast<int>(g)]; }
    const std::vector<double>& operator[](ParamGroup g) const {
        return groups[static_cast<int>(g)];
    }
    void setZero();
    void resize_like(const ParamVector& other);
    std::size_t total_size() const;
    bool allFinite() const;
};

ParamVector pack_params(const SceneModel& model);
void unpack_params(const ParamVector& p, SceneModel& model);

// Gradient container mirroring ParamVector, sized from a model.
ParamVector zero_gradients(const SceneModel& model);

}  // namespace restage
