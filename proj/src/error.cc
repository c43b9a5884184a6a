#include "midas/error.h"

namespace midas {

const char* to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::data: return "data";
    case ErrorCategory::model: return "model";
  }
  return "unknown";
}

}  // namespace midas
