#pragma once

namespace dwrpm {

/// Keeps large freed blocks in the heap instead of returning them to the OS.
/// Training allocates megabyte-sized tensors for every batch; with glibc's
/// defaults each one is a fresh mmap and page-faults on first touch. Call
/// once from main(). A no-op on other C libraries.
void tune_allocator();

}  // namespace dwrpm
