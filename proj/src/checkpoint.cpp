#include "nuc/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "nuc/tensor_io.hpp"

namespace fs = std::filesystem;

namespace nuc {

void to_json(nlohmann::json& j, const ArchConfig& a) {
  j = nlohmann::json{{"n", a.n},
                     {"C", a.C},
                     {"r", a.r},
                     {"sdgw_enabled", a.sdgw_enabled},
                     {"fbgw_enabled", a.fbgw_enabled},
                     {"position_embedding_enabled", a.position_embedding_enabled},
                     {"channel_attention_substitute", a.channel_attention_substitute}};
}

void from_json(const nlohmann::json& j, ArchConfig& a) {
  j.at("n").get_to(a.n);
  j.at("C").get_to(a.C);
  j.at("r").get_to(a.r);
  j.at("sdgw_enabled").get_to(a.sdgw_enabled);
  j.at("fbgw_enabled").get_to(a.fbgw_enabled);
  j.at("position_embedding_enabled").get_to(a.position_embedding_enabled);
  j.at("channel_attention_substitute").get_to(a.channel_attention_substitute);
}

void save_checkpoint(const std::string& dir, ModelParams& model,
                     const CheckpointMeta& meta) {
  const fs::path target(dir);
  const fs::path tmp(dir + ".tmp");
  fs::remove_all(tmp);
  fs::create_directories(tmp / "params");

  nlohmann::json manifest;
  manifest["format"] = "nucckpt1";
  manifest["arch"] = meta.arch;
  manifest["seed"] = meta.seed;
  manifest["epoch"] = meta.epoch;
  manifest["loss_history"] = meta.loss_history;
  {
    std::ofstream f(tmp / "manifest.json", std::ios::trunc);
    if (!f) throw io_error("cannot write checkpoint manifest in '" + dir + "'");
    f << manifest.dump(2) << "\n";
  }
  for_each_param(model, [&](const std::string& name, Tensor& t) {
    write_tensor((tmp / "params" / (name + ".nt")).string(), t, name);
  });

  fs::remove_all(target);
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec)
    throw io_error("cannot move checkpoint into '" + dir + "': " + ec.message());
}

LoadedCheckpoint load_checkpoint(const std::string& dir, bool trainable) {
  std::ifstream f(fs::path(dir) / "manifest.json");
  if (!f) throw io_error("'" + dir + "': missing manifest.json");
  nlohmann::json manifest = nlohmann::json::parse(f, nullptr, false);
  if (manifest.is_discarded() || manifest.value("format", "") != "nucckpt1")
    throw io_error("'" + dir + "/manifest.json': not a checkpoint manifest");

  LoadedCheckpoint out;
  out.meta.arch = manifest.at("arch").get<ArchConfig>();
  out.meta.seed = manifest.value("seed", uint64_t(0));
  out.meta.epoch = manifest.value("epoch", 0);
  if (manifest.contains("loss_history"))
    out.meta.loss_history = manifest["loss_history"].get<std::vector<double>>();

  // Allocate with the manifest arch, then overwrite every buffer from disk.
  out.model = init_model(out.meta.arch, 0);
  for_each_param(out.model, [&](const std::string& name, Tensor& t) {
    const std::string path = (fs::path(dir) / "params" / (name + ".nt")).string();
    NamedTensor loaded = read_tensor(path);
    if (loaded.tensor.shape() != t.shape())
      throw config_error("checkpoint '" + dir + "': parameter '" + name + "' has shape " +
                         shape_str(loaded.tensor.shape()) + ", arch expects " +
                         shape_str(t.shape()));
    t.data_mut() = loaded.tensor.data();
    t.set_requires_grad(trainable);
  });
  return out;
}

}  // namespace nuc
