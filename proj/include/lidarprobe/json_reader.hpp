// Copyright 2026 The lidarprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LIDARPROBE_JSON_READER_HPP
#define LIDARPROBE_JSON_READER_HPP

#include <set>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "lidarprobe/errors.hpp"

namespace lidarprobe {

/// Strict reader over one JSON object: every key must be consumed by a `get`
/// or `child` call before `finish()`, otherwise invalid-input is raised.
class JsonObjectReader {
 public:
  JsonObjectReader(const nlohmann::json& object, std::string context)
      : object_(object), context_(std::move(context)) {
    if (!object_.is_object()) fail(ErrorKind::kInvalidInput, context_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  template <typename T>
  bool get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = object_.find(key);
    if (it == object_.end()) return false;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kInvalidInput, context_ + "." + key + ": " + e.what());
    }
    return true;
  }

  template <typename T>
  T require(const std::string& key) {
    T value{};
    if (!get(key, value)) fail(ErrorKind::kInvalidInput, context_ + ": missing key '" + key + "'");
    return value;
  }

  const nlohmann::json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  const std::string& context() const noexcept { return context_; }

  void finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (seen_.count(it.key()) == 0) {
        fail(ErrorKind::kInvalidInput, context_ + ": unknown key '" + it.key() + "'");
      }
    }
  }

 private:
  const nlohmann::json& object_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace lidarprobe

#endif  // LIDARPROBE_JSON_READER_HPP
