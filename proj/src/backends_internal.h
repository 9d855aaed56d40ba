#pragma once

#include <memory>

#include "probe/scorer.h"

namespace probe::detail {

std::unique_ptr<Backend> make_uniform_backend(const ScorerDescriptor& d);
std::unique_ptr<Backend> make_table_backend(const ScorerDescriptor& d);
std::unique_ptr<Backend> make_frequency_backend(const ScorerDescriptor& d);
std::unique_ptr<Backend> make_process_backend(const ScorerDescriptor& d, const BackendOptions& opts);
std::unique_ptr<Backend> make_http_backend(const ScorerDescriptor& d, const BackendOptions& opts);

}  // namespace probe::detail
