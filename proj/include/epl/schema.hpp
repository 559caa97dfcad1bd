#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "epl/vec.hpp"

namespace epl {

using json = nlohmann::json;

/// Collects every schema violation found while reading a document, each tagged
/// with the JSON pointer of the offending value.
class SchemaErrors {
 public:
  void add(const std::string& path, const std::string& message) {
    errors_.push_back((path.empty() ? std::string("/") : path) + ": " + message);
  }
  bool empty() const noexcept { return errors_.empty(); }
  std::size_t size() const noexcept { return errors_.size(); }
  const std::vector<std::string>& list() const noexcept { return errors_; }

  std::string joined() const {
    std::string s;
    for (const auto& e : errors_) s += e + "\n";
    return s;
  }

 private:
  std::vector<std::string> errors_;
};

namespace schema {

inline std::string child(const std::string& path, const std::string& key) {
  std::string k;
  for (char c : key) {
    if (c == '~') k += "~0";
    else if (c == '/') k += "~1";
    else k += c;
  }
  return path + "/" + k;
}

inline std::string child(const std::string& path, std::size_t index) {
  return path + "/" + std::to_string(index);
}

/// Reports keys of `obj` that are not in `allowed`. Returns false if `obj` is not an object.
inline bool strict_object(const json& obj, const std::string& path,
                          std::initializer_list<const char*> allowed, SchemaErrors& err) {
  if (!obj.is_object()) {
    err.add(path, "expected an object");
    return false;
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) err.add(child(path, it.key()), "unknown field '" + it.key() + "'");
  }
  return true;
}

inline std::optional<double> number(const json& obj, const char* key, const std::string& path,
                                    SchemaErrors& err, bool required = true) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) err.add(child(path, key), "missing required field");
    return std::nullopt;
  }
  if (!it->is_number()) {
    err.add(child(path, key), "expected a number");
    return std::nullopt;
  }
  double v = it->get<double>();
  if (!std::isfinite(v)) {
    err.add(child(path, key), "must be finite");
    return std::nullopt;
  }
  return v;
}

inline std::optional<Vec> vector(const json& value, const std::string& path, SchemaErrors& err) {
  if (!value.is_array() || value.empty()) {
    err.add(path, "expected a nonempty array of numbers");
    return std::nullopt;
  }
  std::vector<double> out;
  bool ok = true;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number()) {
      err.add(child(path, i), "expected a number");
      ok = false;
      continue;
    }
    out.push_back(value[i].get<double>());
  }
  if (!ok) return std::nullopt;
  return Vec(std::move(out));
}

inline std::optional<Vec> vector(const json& obj, const char* key, const std::string& path,
                                 SchemaErrors& err, bool required = true) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) err.add(child(path, key), "missing required field");
    return std::nullopt;
  }
  return vector(*it, child(path, key), err);
}

inline json to_json(const Vec& v) { return json(v.values()); }

}  // namespace schema
}  // namespace epl
