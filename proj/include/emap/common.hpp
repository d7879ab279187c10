#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace emap {

using WordId = std::uint32_t;
using DocId = std::uint32_t;
using SubId = std::uint32_t;

// Bad or missing input data: unreadable files, corrupt headers, out-of-vocabulary
// query words, degenerate user-supplied parameters. The CLI maps these to exit 2.
class data_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A broken internal invariant (mismatched dimensions, out-of-range ids handed
// between modules). The CLI maps these to exit 3.
class internal_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw internal_error(msg);
}

}  // namespace emap
