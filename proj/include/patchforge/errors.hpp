#ifndef PATCHFORGE_ERRORS_HPP
#define PATCHFORGE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace patchforge {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define PATCHFORGE_DEFINE_ERROR(Name)                          \
    class Name : public Error {                                \
    public:                                                    \
        explicit Name(const std::string &what) : Error(what) {} \
    }

PATCHFORGE_DEFINE_ERROR(InvalidLayout);
PATCHFORGE_DEFINE_ERROR(DegenerateSegment);
PATCHFORGE_DEFINE_ERROR(ShapeMismatch);
PATCHFORGE_DEFINE_ERROR(SingularHomography);
PATCHFORGE_DEFINE_ERROR(PointAtInfinity);
PATCHFORGE_DEFINE_ERROR(DegenerateConfiguration);
PATCHFORGE_DEFINE_ERROR(InsufficientInliers);
PATCHFORGE_DEFINE_ERROR(OracleUnavailable);
PATCHFORGE_DEFINE_ERROR(MalformedResponse);
PATCHFORGE_DEFINE_ERROR(DegenerateScenario);
PATCHFORGE_DEFINE_ERROR(ParseError);
PATCHFORGE_DEFINE_ERROR(EmptyBatch);
PATCHFORGE_DEFINE_ERROR(InfeasibleGenome);
PATCHFORGE_DEFINE_ERROR(InvalidConfig);

#undef PATCHFORGE_DEFINE_ERROR

} // namespace patchforge

#endif
