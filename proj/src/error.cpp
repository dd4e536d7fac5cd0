#include "edgestereo/error.hpp"

namespace edgestereo {

const char* to_string(FormatErrorKind kind) noexcept {
    switch (kind) {
    case FormatErrorKind::MalformedHeader: return "malformed header";
    case FormatErrorKind::TruncatedPayload: return "truncated payload";
    case FormatErrorKind::ZeroScale: return "zero scale";
    case FormatErrorKind::UnsupportedPixelFormat: return "unsupported pixel format";
    case FormatErrorKind::CorruptData: return "corrupt data";
    }
    return "format error";
}

} // namespace edgestereo
