#pragma once

#include <stdexcept>
#include <string>

namespace fsdd {

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace fsdd
