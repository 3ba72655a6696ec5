#pragma once

// `--config file.json` for CLI11: a flat JSON object whose keys are long
// option names of the selected subcommand ({"epochs": 20, "no-augment": true}).
// A nested object addresses a named subcommand explicitly. Explicit flags win
// over file values.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace spf::cli {

class JsonConfig : public CLI::Config {
 public:
  // Flat keys are filed under this subcommand.
  explicit JsonConfig(std::string section = {}) : section_(std::move(section)) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    return collect(app, default_also).dump();
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError("config is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, section_.empty() ? std::vector<std::string>{} : std::vector<std::string>{section_}, items);
    return items;
  }

 private:
  static nlohmann::ordered_json collect(const CLI::App* app, bool default_also) {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || opt == app->get_help_ptr() || opt == app->get_config_ptr()) continue;
      const std::string& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& res = opt->results();
        if (opt->get_type_size() == 0) {
          out[name] = opt->as<bool>();
        } else if (res.size() == 1) {
          out[name] = res.front();
        } else {
          out[name] = res;
        }
      } else if (default_also && !opt->get_default_str().empty()) {
        out[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands()) out[sub->get_name()] = collect(sub, default_also);
    return out;
  }

  static void flatten(const nlohmann::json& j, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        flatten(value, {key}, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      const auto text = [](const nlohmann::json& v) {
        return v.is_string() ? v.get<std::string>() : v.dump();
      };
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(text(v));
      } else {
        item.inputs.push_back(text(value));
      }
      items.push_back(std::move(item));
    }
  }

  std::string section_;
};

}  // namespace spf::cli
