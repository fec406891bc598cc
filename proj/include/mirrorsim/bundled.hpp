#pragma once

// Bundled circuit descriptions, compiled into the library so analyses and the
// CLI work without external files. The same texts are shipped under netlists/
// for direct use; a test keeps the two in sync.

#include <string_view>
#include <vector>

namespace mirrorsim {

/// Netlist text by asset name (e.g. "set_branch", matching the file name
/// under netlists/ without extension). Throws Error(validation) for
/// unknown names.
[[nodiscard]] std::string_view bundled_netlist(std::string_view name);

[[nodiscard]] const std::vector<std::string_view>& bundled_netlist_names();

} // namespace mirrorsim
