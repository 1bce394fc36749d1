#pragma once

#include <optional>
#include <string_view>

namespace randse {

/// Feasible standard-error methods.
enum class Method { Classic, HC0, HC1, ClusterLZ, HacNW, Tsls };

const char* method_name(Method m);
std::optional<Method> parse_method(std::string_view name);

}  // namespace randse
