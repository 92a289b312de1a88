exception_messages = {
    "InvalidFrame": "a frame must be a finite 2D intensity grid with values in [0, 1]",
    "InvalidFps": lambda fps: f"the frame rate must be positive, got {fps}",
    "FrameShapeMismatch": lambda index, shape, expected: f"frame {index} has shape {shape}, expected {expected}",
    "EmptySequence": "a frame sequence needs at least one frame",
    "BadMagic": lambda magic: f"expected a YUV4MPEG2 stream, found {magic!r}",
    "BadHeaderTag": lambda tag: f"malformed Y4M header tag {tag!r}",
    "MissingHeaderTag": lambda tag: f"Y4M header lacks the mandatory {tag} tag",
    "UnsupportedColorspace": lambda colorspace: f"Y4M colorspace {colorspace} is not supported (C420* and Cmono only)",
    "BadFrameMarker": lambda index: f"frame {index} does not start with a FRAME marker",
    "TruncatedFrame": lambda index, missing: f"frame {index} is truncated, {missing} bytes missing",
    "BadPgm": lambda reason: f"not a binary 8-bit PGM file: {reason}",
    "UnsupportedPng": lambda mode: f"PNG mode {mode} is not supported (8-bit grayscale or RGB only)",
    "UnsupportedImage": lambda name: f"{name} is neither a PGM nor a PNG file",
    "TooFewFrames": lambda count, pattern: f"found {count} frame(s) matching {pattern}, at least 2 are needed",
    "MixedDimensions": lambda name, shape, expected: f"{name} has shape {shape}, expected {expected}",
    "InvalidFlowConfig": lambda field, value: f"{value} is not a valid value for FlowConfig.{field}",
    "PointOutsideInset": lambda point, half_width: f"point {point} is closer than {half_width} px to the frame border",
    "CropMismatch": lambda first, second: f"pyramids cover crops at different origins {first} and {second}",
    "NoFramesToTrack": "tracking needs at least 2 frames",
    "NoPointsToTrack": "tracking needs at least 1 initial point",
    "NonFinite": "non-finite arithmetic during Lucas-Kanade refinement",
    "AllPointsLost": lambda frame_index: f"all points were lost at frame {frame_index}",
    "KeypointSyntax": lambda line, msg: f"keypoint file syntax error at line {line}: {msg}",
    "KeypointNotObject": "a keypoint file must hold one object mapping landmark names to [x, y]",
    "KeypointValue": lambda name: f"landmark {name} must be a two-element numeric array",
    "DuplicateLandmark": lambda name: f"landmark {name} appears more than once",
    "UnknownLandmark": lambda name, allowed: f"{name} is not a known landmark. Available options are {', '.join(allowed)}.",
    "MissingLandmark": lambda name: f"landmark {name} is required but missing",
    "LandmarkOutside": lambda name, point: f"landmark {name} at {point} lies outside the frame",
    "EqualShoulderX": "shoulder_left and shoulder_right share the same x coordinate",
    "TooFewRows": lambda rows: f"a chest grid needs at least 2 rows, got {rows}",
    "DegenerateGrid": lambda dropped, total: f"{dropped} of {total} grid points fall outside the trackable area",
    "InvalidKind": lambda kind, allowed: f"{kind} is not a valid point configuration. Available options are {', '.join(allowed)}.",
    "InvalidSignal": "a breath signal needs a positive sample rate and at least 2 finite samples",
    "EmptySignal": "no point survived past frame 1, the signal would be empty",
    "WrongSignalKind": lambda expected, got: f"expected a {expected} signal, got a {got} signal",
    "InvalidBand": lambda low, high, fs: f"band {low}-{high} Hz is not valid for a sample rate of {fs} Hz",
    "InvalidOrder": lambda order: f"filter order must be at least 1, got {order}",
    "SignalTooShort": lambda length, minimum: f"signal has {length} samples, the filter needs more than {minimum - 1}",
    "InvalidDuration": lambda duration: f"duration must be positive, got {duration}",
    "LengthMismatch": lambda n_est, n_truth: f"got {n_est} estimates for {n_truth} reference values",
    "EmptyScores": "at least one estimate/reference pair is required",
    "EmptyManifest": "the manifest must contain at least one case",
    "ManifestSyntax": lambda path, msg: f"cannot parse manifest {path}: {msg}",
    "ManifestField": lambda index, field: f"case {index} lacks the mandatory field {field}",
    "ManifestSamePath": lambda index: f"case {index} uses the same path for video and keypoints",
    "InvalidTruth": lambda key, bpm: f"reference rate for {key} must be positive, got {bpm}",
    "InvalidScene": lambda reason: f"invalid scene specification: {reason}",
    "InvalidTexture": lambda kind, allowed: f"{kind} is not a valid texture. Available options are {', '.join(allowed)}.",
}
