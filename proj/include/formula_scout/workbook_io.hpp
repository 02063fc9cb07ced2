// Copyright 2026 The Formula Scout Authors
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

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "formula_scout/grid.hpp"

namespace formula_scout {

/// Reads the canonical JSON workbook dump. Unknown fields are ignored.
/// Throws SchemaError with the path of the first offending field.
Workbook load_workbook(std::string_view json_text);

/// Writes the canonical dump: fixed field order, cells in row-major order,
/// two-space indentation, trailing newline. load_workbook followed by
/// dump_workbook is byte-identical on anything this function produced.
std::string dump_workbook(const Workbook& wb);

Workbook load_workbook_file(const std::filesystem::path& path);
void save_workbook_file(const Workbook& wb, const std::filesystem::path& path);

/// All `*.json` dumps in a directory, sorted by file name.
std::vector<Workbook> load_corpus(const std::filesystem::path& dir);

/// Stable content hash of a workbook (id excluded), rendered as 16 hex chars.
std::string content_hash(const Workbook& wb);

/// Called once per skipped cell during OOXML import.
using ImportWarning = std::function<void(const std::string&)>;

/// Best-effort import of a ZIP-packaged OOXML workbook (.xlsx). Unsupported
/// features are dropped; per-cell failures are reported through `warn` and
/// skipped. Throws ImportError for a corrupt archive.
Workbook import_ooxml(std::string_view bytes, const ImportWarning& warn = {});

Workbook import_ooxml_file(const std::filesystem::path& path, const ImportWarning& warn = {});

}  // namespace formula_scout
