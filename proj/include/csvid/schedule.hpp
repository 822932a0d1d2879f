#pragma once

#include <limits>

#include "csvid/error.hpp"

namespace csvid {

// Training protocol: initial learning rate 1e-3, divided by 10 whenever the
// validation loss has not reached a new best for 10 consecutive epochs, and
// training stops once it has not improved for 22 consecutive epochs.
struct TrainSchedule {
  double initial_lr = 1e-3;
  double plateau_factor = 10.0;
  int plateau_patience = 10;
  int stop_patience = 22;
  std::size_t batch_size = 16;
  int max_epochs = 100;

  void validate() const {
    require(initial_lr > 0.0, errc::invalid_argument, "schedule: lr must be positive");
    require(plateau_factor > 1.0, errc::invalid_argument, "schedule: factor must exceed 1");
    require(plateau_patience > 0 && stop_patience > 0, errc::invalid_argument,
            "schedule: patience values must be positive");
    require(batch_size >= 1, errc::invalid_argument, "schedule: batch size must be >= 1");
    require(max_epochs >= 1, errc::invalid_argument, "schedule: max epochs must be >= 1");
  }
};

// The plateau automaton, separated from the training loop so the learning
// rate and stop epoch are pure functions of the validation-loss sequence.
// "No new best" counts strictly: an epoch matching the best exactly does not
// reset the patience counters. Drops repeat at every patience multiple while
// the plateau persists.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(const TrainSchedule& s) : sched_(s), lr_(s.initial_lr) {
    s.validate();
  }

  struct Decision {
    double lr;
    bool improved;
    bool dropped;
    bool stop;
  };

  Decision observe(double val_loss) {
    ++epoch_;
    Decision d{lr_, false, false, false};
    if (val_loss < best_) {
      best_ = val_loss;
      best_epoch_ = epoch_;
      since_best_ = 0;
      d.improved = true;
    } else {
      ++since_best_;
      if (since_best_ % sched_.plateau_patience == 0) {
        lr_ /= sched_.plateau_factor;
        d.dropped = true;
      }
      if (since_best_ >= sched_.stop_patience) d.stop = true;
    }
    d.lr = lr_;
    return d;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }
  int epochs_since_best() const { return since_best_; }

 private:
  TrainSchedule sched_;
  double lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int since_best_ = 0;
  int epoch_ = 0;
};

}  // namespace csvid
