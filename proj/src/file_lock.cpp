#include "orchestrate/file_lock.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "orchestrate/error.hpp"

namespace orchestrate {

FileLock::FileLock(const std::filesystem::path& file, Mode mode) {
    fd_ = ::open(file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw Error(ErrorKind::internal, "cannot open lock file " + file.string() + ": " + std::strerror(errno));
    }
    const int op = mode == Mode::wait ? LOCK_EX : LOCK_EX | LOCK_NB;
    int rc;
    do {
        rc = ::flock(fd_, op);
    } while (rc != 0 && errno == EINTR);
    if (rc == 0) {
        held_ = true;
    } else if (errno != EWOULDBLOCK) {
        const int err = errno;
        ::close(fd_);
        fd_ = -1;
        throw Error(ErrorKind::internal, "cannot lock " + file.string() + ": " + std::strerror(err));
    }
}

FileLock::~FileLock() {
    if (fd_ >= 0) ::close(fd_);
}

}  // namespace orchestrate
