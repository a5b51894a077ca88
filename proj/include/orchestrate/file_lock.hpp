#pragma once

#include <filesystem>

namespace orchestrate {

/// Advisory exclusive flock on a file, released on destruction.
class FileLock {
public:
    enum class Mode { wait, try_once };

    FileLock(const std::filesystem::path& file, Mode mode = Mode::wait);
    ~FileLock();
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

    /// False only when Mode::try_once found the lock held elsewhere.
    bool held() const noexcept { return held_; }

private:
    int fd_ = -1;
    bool held_ = false;
};

}  // namespace orchestrate
