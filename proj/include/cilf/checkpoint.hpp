#pragma once

#include <string>
#include <utility>

#include "cilf/encoder.hpp"
#include "cilf/prototypes.hpp"

namespace cilf {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    EncoderModel model;
    PrototypeSet prototypes;
    double alpha = 0.3;
};

// JSON with full round-trip float precision; save -> load -> save is
// byte-identical.
std::string checkpoint_to_json(const EncoderModel& model, const PrototypeSet& prototypes,
                               double alpha);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const EncoderModel& model, const PrototypeSet& prototypes, double alpha,
                     const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cilf
