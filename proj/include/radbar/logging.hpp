#pragma once

namespace radbar {

/// Configures the process-wide logger from RADBAR_LOG
/// (error|warn|info|debug, default warn). Logs go to stderr. Only the first
/// call has an effect.
void init_logging();

}  // namespace radbar
