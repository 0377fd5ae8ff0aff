#pragma once

// Convenience include for the whole library.

#include "blocks.hpp"   // IWYU pragma: export
#include "core.hpp"     // IWYU pragma: export
#include "fusion.hpp"   // IWYU pragma: export
#include "io.hpp"       // IWYU pragma: export
#include "stc.hpp"      // IWYU pragma: export
#include "str.hpp"      // IWYU pragma: export
#include "verify.hpp"   // IWYU pragma: export
