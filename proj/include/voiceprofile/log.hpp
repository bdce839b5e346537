#pragma once

namespace voiceprofile {

/// Routes spdlog to stderr at the level named by VOICEPROFILE_LOG
/// (error, warn, info, debug; default warn). Unknown values keep the default.
void init_logging();

}  // namespace voiceprofile
