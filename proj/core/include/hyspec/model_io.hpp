#pragma once

#include <filesystem>

#include "hyspec/autoencoder.hpp"
#include "hyspec/mae.hpp"

namespace hyspec::mae {

// Checkpoint layout, all little-endian:
//   8 bytes   magic "HYSPECCK"
//   u32       format version (1)
//   u32       kind (1 = MAE, 2 = AE)
//   header    kind-specific config fields, u64 or f64 each, then u64 bands
//   u64       parameter count P
//   P x f64   flat parameters in registration order
// A JSON sidecar (same path, extension .json) carries the config, epoch
// count, final losses and a parameter checksum.
void save_mae(const std::filesystem::path& path, const MAEModel& model, const LossCurve& curve);
MAEModel load_mae(const std::filesystem::path& path);

void save_autoencoder(const std::filesystem::path& path, const AEModel& model, const LossCurve& curve);
AEModel load_autoencoder(const std::filesystem::path& path);

// "epoch,train_loss,validation_loss" rows, epoch 0 first.
void write_loss_csv(const std::filesystem::path& path, const LossCurve& curve);

}  // namespace hyspec::mae
