#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "../core/error.hpp"

namespace cocoanet {

enum class ScheduleKind { HalvePerEpoch, PlateauDiv10, Linear };

inline const char* schedule_name(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::HalvePerEpoch: return "halve_per_epoch";
        case ScheduleKind::PlateauDiv10: return "plateau_div10";
        case ScheduleKind::Linear: return "linear";
    }
    return "?";
}

inline ScheduleKind schedule_from_string(const std::string& s) {
    if (s == "halve_per_epoch") return ScheduleKind::HalvePerEpoch;
    if (s == "plateau_div10") return ScheduleKind::PlateauDiv10;
    if (s == "linear") return ScheduleKind::Linear;
    throw ConfigError("unknown scheduler \"" + s +
                      "\" (expected halve_per_epoch, plateau_div10 or linear)");
}

struct Schedule {
    ScheduleKind kind = ScheduleKind::HalvePerEpoch;
    double base_lr = 1e-3;
    long total_epochs = 20; // linear only
};

// Epochs count from 0. halve_per_epoch uses ldexp so the halving is exact in
// floating point; plateau_div10 divides by 10 per observed plateau event
// (the trainer counts those); linear decays to base/total at the final epoch.
inline double lr_at(const Schedule& s, long epoch, int plateau_events = 0) {
    if (epoch < 0) throw std::invalid_argument("lr_at: negative epoch");
    switch (s.kind) {
        case ScheduleKind::HalvePerEpoch:
            return std::ldexp(s.base_lr, static_cast<int>(-epoch));
        case ScheduleKind::PlateauDiv10:
            return s.base_lr * std::pow(10.0, -plateau_events);
        case ScheduleKind::Linear: {
            if (s.total_epochs <= 0) throw ConfigError("linear schedule needs total epochs");
            const double f =
                1.0 - static_cast<double>(epoch) / static_cast<double>(s.total_epochs);
            return s.base_lr * std::max(f, 1.0 / static_cast<double>(s.total_epochs));
        }
    }
    return s.base_lr;
}

// Tracks the best validation macro-F1; fires once the score has failed to
// improve for `patience` consecutive epoch-end evaluations (so it can never
// fire before patience+1 evaluations have happened).
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {
        if (patience < 1) throw ConfigError("early-stop patience must be >= 1");
    }

    // Returns true when this epoch set a new best.
    bool observe(long epoch, double val_macro_f1) {
        if (val_macro_f1 > best_) {
            best_ = val_macro_f1;
            best_epoch_ = epoch;
            since_ = 0;
            return true;
        }
        ++since_;
        return false;
    }

    bool should_stop() const { return since_ >= patience_; }
    long best_epoch() const { return best_epoch_; }
    double best_score() const { return best_; }
    int epochs_since_improvement() const { return since_; }

private:
    int patience_;
    double best_ = -std::numeric_limits<double>::infinity();
    long best_epoch_ = -1;
    int since_ = 0;
};

} // namespace cocoanet
