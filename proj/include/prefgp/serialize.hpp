#pragma once

#include <string>
#include <vector>

#include "prefgp/crowd.hpp"
#include "prefgp/gppl.hpp"

namespace prefgp {

// Versioned JSON model container ("prefgp-model", version 1). Doubles are
// written with enough digits for an exact round-trip.
enum class ModelKind { Gppl, Crowd, GpplPerUser };

void save_model(const GpplState& state, const std::string& path);
void save_model(const CrowdState& state, const std::string& path);
// One independently trained GPPL per user; the consensus at predict time is
// the mean across users.
void save_model(const std::vector<GpplState>& per_user,
                const std::string& path);

ModelKind peek_model_kind(const std::string& path);

GpplState load_gppl(const std::string& path);
CrowdState load_crowd(const std::string& path);
std::vector<GpplState> load_gppl_per_user(const std::string& path);

}  // namespace prefgp
