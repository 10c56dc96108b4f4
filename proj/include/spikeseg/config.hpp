#pragma once

// key = value configuration files with [sections], backed by boost's INI
// reader. Keys are addressed as "section.key".

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "spikeseg/error.hpp"
#include "spikeseg/io.hpp"

namespace spikeseg {

class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text, const std::string& origin = "<string>") {
    Config c;
    std::istringstream in(text);
    try {
      boost::property_tree::ini_parser::read_ini(in, c.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw Error(Errc::ConfigInvalid, origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    c.origin_ = origin;
    return c;
  }

  static Config load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(Errc::IoFailure, "missing config " + path.string());
    return parse(io::read_text(path), path.string());
  }

  bool has(const std::string& key) const { return lookup(key).has_value(); }

  template <class V>
  V get(const std::string& key, const V& fallback) const {
    auto raw = lookup(key);
    if (!raw) return fallback;
    return convert<V>(key, *raw);
  }

  template <class V>
  V require(const std::string& key) const {
    auto raw = lookup(key);
    if (!raw) throw Error(Errc::ConfigInvalid, origin_ + ": missing key " + key);
    return convert<V>(key, *raw);
  }

  template <class V>
  void set(const std::string& key, const V& value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    const auto [section, name] = split_key(key);
    if (section.empty()) {
      tree_.put(Path(name, '/'), os.str());
      return;
    }
    auto child = tree_.get_child_optional(Path(section, '/'));
    auto& node = child ? *child : tree_.put_child(Path(section, '/'), {});
    node.put(Path(name, '/'), os.str());
  }

  // Top-level section names in file order.
  std::vector<std::string> sections() const {
    std::vector<std::string> out;
    for (const auto& [name, child] : tree_) out.push_back(name);
    return out;
  }

  std::string to_string() const {
    std::ostringstream os;
    boost::property_tree::ini_parser::write_ini(os, tree_);
    return os.str();
  }

  const std::string& origin() const { return origin_; }

 private:
  using Path = boost::property_tree::ptree::path_type;

  // "section.key" where the section is the longest existing section name
  // that prefixes the key, so section names may contain dots.
  std::pair<std::string, std::string> split_key(const std::string& key) const {
    std::string best;
    for (const auto& [name, child] : tree_) {
      if (!child.empty() && key.size() > name.size() + 1 && key.compare(0, name.size(), name) == 0 &&
          key[name.size()] == '.' && name.size() > best.size()) {
        best = name;
      }
    }
    if (best.empty()) {
      const auto dot = key.find('.');
      if (dot == std::string::npos) return {"", key};
      return {key.substr(0, dot), key.substr(dot + 1)};
    }
    return {best, key.substr(best.size() + 1)};
  }

  std::optional<std::string> lookup(const std::string& key) const {
    const auto [section, name] = split_key(key);
    const auto* node = &tree_;
    if (!section.empty()) {
      auto child = tree_.get_child_optional(Path(section, '/'));
      if (!child) return std::nullopt;
      node = &*child;
    }
    auto v = node->get_optional<std::string>(Path(name, '/'));
    return v ? std::optional<std::string>(*v) : std::nullopt;
  }

  template <class V>
  V convert(const std::string& key, const std::string& raw) const {
    if constexpr (std::is_same_v<V, std::string>) {
      return raw;
    } else if constexpr (std::is_same_v<V, bool>) {
      if (raw == "true" || raw == "1" || raw == "yes") return true;
      if (raw == "false" || raw == "0" || raw == "no") return false;
      throw Error(Errc::ConfigInvalid, origin_ + ": " + key + " = " + raw + " is not a boolean");
    } else {
      std::istringstream in(raw);
      V v{};
      in >> v;
      if (in.fail() || !(in >> std::ws).eof()) {
        throw Error(Errc::ConfigInvalid, origin_ + ": " + key + " = " + raw);
      }
      return v;
    }
  }

  boost::property_tree::ptree tree_;
  std::string origin_ = "<empty>";
};

}  // namespace spikeseg
