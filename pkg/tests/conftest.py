import hypothesis

hypothesis.settings.register_profile("repro", deadline=None, derandomize=True)
hypothesis.settings.load_profile("repro")
