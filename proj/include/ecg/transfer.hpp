#pragma once

#include <filesystem>
#include <iosfwd>
#include <utility>

#include "ecg/train.hpp"

namespace ecg {

struct TransferConfig {
  TrainConfig train;
  bool freeze_features = true;
};

// MIT-BIH -> PTB transfer: swap the 5-class head for a 2-class one and
// fine-tune on PTB. With freeze_features only the dense head trains and
// every feature tensor stays bit-identical.
TrainHistory transfer_fit(Network& base, const Dataset& ptb_train,
                          const Dataset& ptb_val, const TransferConfig& config,
                          std::ostream* log = nullptr);

// Convenience: load the base from a checkpoint first.
std::pair<Network, TrainHistory> transfer_fit(
    const std::filesystem::path& base_checkpoint, const Dataset& ptb_train,
    const Dataset& ptb_val, const TransferConfig& config,
    std::ostream* log = nullptr);

}  // namespace ecg
