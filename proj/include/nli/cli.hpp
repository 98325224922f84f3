#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nli {

// Flat key=value configuration: one canonical file, command-line overrides
// win. Keys are validated against the known set so typos fail loudly.
class Config {
 public:
  static Config from_file(const std::string& path);
  Config() = default;

  // "--key=value" override (or plain "key=value").
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback = "") const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Path that must exist; throws io_error naming the key otherwise.
  std::string required_path(const std::string& key) const;

  std::uint64_t seed() const { return get_u64("seed", 1); }
  std::string out_dir() const { return get("out.dir", "out"); }

 private:
  std::map<std::string, std::string> values_;
};

// Exit statuses: 0 success, 1 user/config error, 2 internal failure.
int cmd_train(const Config& config);
int cmd_finetune(const Config& config);
int cmd_attack(const Config& config);
int cmd_craft(const Config& config);
int cmd_audit(const Config& config);
int cmd_eval(const Config& config);

// Dispatches a command by name, mapping exceptions onto exit statuses.
int run_command(const std::string& command, const Config& config);

}  // namespace nli
