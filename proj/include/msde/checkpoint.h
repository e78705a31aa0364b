//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_CHECKPOINT_H_
#define MSDE_CHECKPOINT_H_

#include <filesystem>
#include <string>

#include "msde/array.h"

namespace msde {

// Binary layout: the 5 magic bytes "MSDE1", then one record per array in
// name order:
//   u64 name length | name bytes (UTF-8) | u64 rank | rank x u64 dims |
//   prod(dims) x f64 values
// All integers and doubles are little-endian.
std::string encode_checkpoint(const NamedArrays &arrays);
NamedArrays decode_checkpoint(const std::string &bytes);

void save_checkpoint(const std::filesystem::path &path,
                     const NamedArrays &arrays);
NamedArrays load_checkpoint(const std::filesystem::path &path);

} // namespace msde

#endif // MSDE_CHECKPOINT_H_
