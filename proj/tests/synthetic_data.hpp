#pragma once

#include <cstdint>
#include <filesystem>

// Small synthetic ten-class datasets written in the on-disk formats the
// loaders expect: event files under <root>/<Train|Test>/<class>/ and
// IDX image/label pairs. Each class is a bright blob at a
// class-specific position, so spatial filters can separate them.
namespace psn::testsupport {

void write_synthetic_events(const std::filesystem::path& root, std::size_t per_class_train,
                            std::size_t per_class_test, std::uint64_t seed);

void write_synthetic_images(const std::filesystem::path& root, std::size_t train_count,
                            std::size_t test_count, std::uint64_t seed);

}  // namespace psn::testsupport
