#pragma once

#include <cstddef>
#include <iosfwd>

namespace meso::tools {

struct SelftestResult {
    std::size_t checks = 0;
    std::size_t failures = 0;
};

/// Closed forms, identities and small oracle comparisons across all modules.
/// Failing checks are listed on `log`.
SelftestResult run_selftest(std::ostream& log);

}  // namespace meso::tools
