/*
 * Copyright 2026 The dialseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>
#include <vector>

#include "dialseg/common.hpp"

namespace dialseg {

/// Plain-text sectioned key=value configuration. '#' starts a comment.
/// Unknown sections or keys are errors: consumers must consume every pair.
struct ConfigFile {
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
    mutable bool consumed = false;
  };
  std::vector<Entry> entries;

  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_text(const std::string& text, const std::string& origin = "<string>");

  /// Fetch a value (marking it consumed); empty when absent.
  const std::string* find(const std::string& section, const std::string& key) const;

  /// Throws ConfigError listing any unconsumed (unknown) keys.
  void require_all_consumed() const;
};

double config_to_double(const std::string& key, const std::string& value);
long config_to_int(const std::string& key, const std::string& value);
bool config_to_bool(const std::string& key, const std::string& value);
std::vector<double> config_to_list(const std::string& key, const std::string& value);

}  // namespace dialseg
