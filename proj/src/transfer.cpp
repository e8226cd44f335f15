#include "ecg/transfer.hpp"

#include "ecg/checkpoint.hpp"
#include "ecg/errors.hpp"

namespace ecg {

TrainHistory transfer_fit(Network& base, const Dataset& ptb_train,
                          const Dataset& ptb_val, const TransferConfig& config,
                          std::ostream* log) {
  if (base.n_classes() != 5) {
    throw CheckpointError("transfer: base model has " +
                          std::to_string(base.n_classes()) +
                          " classes, expected a 5-class base");
  }
  if (base.input_length() != ptb_train.input_length) {
    throw CheckpointError("transfer: base input length " +
                          std::to_string(base.input_length()) +
                          " does not match dataset beat length " +
                          std::to_string(ptb_train.input_length));
  }
  base.replace_head(2, ptb_train.label_names, config.train.seed);
  base.set_feature_frozen(config.freeze_features);
  TrainHistory history = train(base, ptb_train, ptb_val, config.train, log);
  base.set_feature_frozen(false);
  return history;
}

std::pair<Network, TrainHistory> transfer_fit(
    const std::filesystem::path& base_checkpoint, const Dataset& ptb_train,
    const Dataset& ptb_val, const TransferConfig& config, std::ostream* log) {
  Network net = load_checkpoint(base_checkpoint);
  TrainHistory history = transfer_fit(net, ptb_train, ptb_val, config, log);
  return {std::move(net), std::move(history)};
}

}  // namespace ecg
